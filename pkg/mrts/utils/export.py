"""
Delimited-text writers. Every file starts with '# '-prefixed provenance lines followed
by a CSV table written through pandas.
"""

from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Union
import logging

import numpy as np
import pandas as pd

from ..core.basis import RADICAL_CONFIGS
from ..core.constants import (
    ARTIFACT_VERSION,
    FLOAT_FORMAT,
    OUTPUT_DELIMITER,
    PROVENANCE_PREFIX,
)
from ..core.units import from_internal
from ..services.dynamics_service import (
    Tomography,
    Trajectory,
    coherence_trace,
    manifold_populations,
    population_trace,
)
from ..services.spectrum_service import Spectrum

logger = logging.getLogger(__name__)


def provenance_header(command: str, config_lines: Iterable[str],
                      extra: Optional[Dict[str, object]] = None) -> List[str]:
    """Header lines: artifact version, command, extra facts, then the resolved config."""
    lines = [f"mrts artifact_version = {ARTIFACT_VERSION}", f"command = {command}"]
    for key, value in (extra or {}).items():
        lines.append(f"{key} = {value}")
    lines.extend(config_lines)
    return lines


def write_table(path: Union[str, Path], frame: pd.DataFrame, header: Sequence[str]) -> Path:
    """Write provenance lines and the frame; returns the path written."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        for line in header:
            handle.write(f"{PROVENANCE_PREFIX}{line}\n")
        frame.to_csv(handle, sep=OUTPUT_DELIMITER, index=False,
                     float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.info(f"Wrote {path}")
    return path


def read_table(path: Union[str, Path]) -> pd.DataFrame:
    """Read a file written by `write_table`, skipping the provenance lines."""
    return pd.read_csv(path, sep=OUTPUT_DELIMITER, comment=PROVENANCE_PREFIX.strip())


def trajectory_frame(traj: Trajectory, bra: str, ket: str,
                     population_labels: Sequence[str]) -> pd.DataFrame:
    """t_ns, pop[<label>]..., p_S0/p_S1/p_T1, coh_re/coh_im/coh_abs."""
    data: Dict[str, np.ndarray] = {"t_ns": traj.times}
    for label in population_labels:
        data[f"pop[{label}]"] = population_trace(traj, label)
    for name, series in manifold_populations(traj).items():
        data[f"p_{name}"] = series
    coherence = coherence_trace(traj, bra, ket)
    data["coh_re"] = coherence.real
    data["coh_im"] = coherence.imag
    data["coh_abs"] = np.abs(coherence)
    return pd.DataFrame(data)


def tomography_frame(tomography: Tomography) -> pd.DataFrame:
    """One row per bra configuration; abs_/re_/im_ columns per ket configuration."""
    rows = []
    for i, bra in enumerate(RADICAL_CONFIGS):
        row: Dict[str, object] = {"row": bra}
        for j, ket in enumerate(RADICAL_CONFIGS):
            row[f"abs_{ket}"] = float(abs(tomography.rdm[i, j]))
        for j, ket in enumerate(RADICAL_CONFIGS):
            row[f"re_{ket}"] = float(tomography.rdm[i, j].real)
        for j, ket in enumerate(RADICAL_CONFIGS):
            row[f"im_{ket}"] = float(tomography.rdm[i, j].imag)
        rows.append(row)
    return pd.DataFrame(rows)


def spectrum_frame(spectrum: Spectrum) -> pd.DataFrame:
    return pd.DataFrame({
        "omega_rad_per_ns": spectrum.grid.omegas,
        "intensity": spectrum.intensities,
    })


def timings_frame(spectrum: Spectrum) -> pd.DataFrame:
    return pd.DataFrame(spectrum.timings, columns=["index", "theta", "phi", "seconds"])


def scan_frame(spectra: Sequence[Spectrum], j1_values: Sequence[float]) -> pd.DataFrame:
    """Shared omega column plus one intensity column per J1 (labelled in mT)."""
    data: Dict[str, np.ndarray] = {"omega_rad_per_ns": spectra[0].grid.omegas}
    for j1, spectrum in zip(j1_values, spectra):
        data[f"intensity[J1={from_internal(j1, 'mT'):.6g} mT]"] = spectrum.intensities
    return pd.DataFrame(data)

"""Wavelength-dependent complex refractive indices.

A :class:`MaterialTable` holds sorted (wavelength, n) samples and
interpolates linearly in the real and imaginary parts. The bundled
defaults are constant, lossless silica and titania indices over
300-900 nm; real dispersion data can be loaded from plain-text tables.
"""

from __future__ import annotations

import numpy as np


class MaterialDomainError(ValueError):
    """Queried wavelength lies outside a material table's domain."""

    def __init__(self, name, wavelength, lo, hi):
        super().__init__(
            f"material {name!r} has no data at {wavelength:g} nm "
            f"(table covers [{lo:g}, {hi:g}] nm)"
        )
        self.material = name
        self.wavelength = wavelength


class MaterialTable:
    """Sorted (wavelength nm, complex index) samples for one material."""

    def __init__(self, name: str, wavelengths, indices):
        self.name = name
        self.wavelengths = np.asarray(wavelengths, dtype=np.float64)
        self.indices = np.asarray(indices, dtype=np.complex128)
        if self.wavelengths.ndim != 1 or self.wavelengths.size < 2:
            raise ValueError(f"material {name!r}: need at least two samples")
        if self.wavelengths.size != self.indices.size:
            raise ValueError(f"material {name!r}: wavelength/index length mismatch")
        if not np.all(np.diff(self.wavelengths) > 0):
            raise ValueError(f"material {name!r}: wavelengths must be strictly increasing")
        if not np.all(np.isfinite(self.wavelengths)):
            raise ValueError(f"material {name!r}: non-finite wavelength")
        if not np.all(np.isfinite(self.indices)):
            raise ValueError(f"material {name!r}: non-finite index")
        if np.any(self.indices.imag < 0):
            raise ValueError(f"material {name!r}: negative imaginary index (gain medium)")

    def at(self, wavelength: float) -> complex:
        """Complex index at one wavelength (linear interpolation)."""
        return complex(self.at_many(np.asarray([wavelength]))[0])

    def at_many(self, wavelengths) -> np.ndarray:
        lam = np.asarray(wavelengths, dtype=np.float64)
        lo, hi = self.wavelengths[0], self.wavelengths[-1]
        bad = (lam < lo) | (lam > hi) | ~np.isfinite(lam)
        if np.any(bad):
            raise MaterialDomainError(self.name, float(lam[bad][0]), lo, hi)
        re = np.interp(lam, self.wavelengths, self.indices.real)
        im = np.interp(lam, self.wavelengths, self.indices.imag)
        return re + 1j * im

    def __repr__(self):
        return (
            f"MaterialTable({self.name!r}, {self.wavelengths[0]:g}-"
            f"{self.wavelengths[-1]:g} nm, {self.wavelengths.size} samples)"
        )


def constant_index(name: str, n: complex, lambda_min=300.0, lambda_max=900.0) -> MaterialTable:
    """Dispersion-free table covering [lambda_min, lambda_max]."""
    return MaterialTable(name, [lambda_min, lambda_max], [n, n])


def refractive_index(table: MaterialTable, wavelength: float) -> complex:
    """Interpolated complex index of `table` at `wavelength` (nm)."""
    return table.at(wavelength)


def load_material_table(path) -> MaterialTable:
    """Read a `# material <name>` header plus `wavelength n_real n_imag` rows."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        parts = header.split(None, 2)
        if len(parts) != 3 or parts[0] != "#" or parts[1] != "material":
            raise ValueError(f"{path}: first line must be '# material <name>'")
        name = parts[2].strip()
        wavelengths, indices = [], []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            cols = line.split()
            if len(cols) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 columns, got {len(cols)}")
            lam, n_re, n_im = (float(c) for c in cols)
            wavelengths.append(lam)
            indices.append(complex(n_re, n_im))
    return MaterialTable(name, wavelengths, indices)


def save_material_table(table: MaterialTable, path) -> None:
    lines = [f"# material {table.name}"]
    for lam, n in zip(table.wavelengths, table.indices):
        lines.append(f"{float(lam)!r} {float(n.real)!r} {float(n.imag)!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def default_materials() -> dict:
    """Bundled silica/titania tables (constant, lossless)."""
    return {
        "SiO2": constant_index("SiO2", 1.45 + 0.0j),
        "TiO2": constant_index("TiO2", 2.40 + 0.0j),
    }

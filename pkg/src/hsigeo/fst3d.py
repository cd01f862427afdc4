"""Three-stage 3-D Fourier scattering transform for hyperspectral cubes.

Each stage convolves its input with a bank of modulated Gaussian windows
(time-frequency shifts of one real window), takes the complex modulus and
downsamples. Features for a pixel are the spatial means of the low-pass
outputs of orders 0, 1 and 2 over the pixel's neighborhood patch.

All convolutions are circular on the patch grid and computed with FFTs.
"""

from __future__ import annotations

import itertools
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import fft as sfft

from .errors import ConfigError, ShapeError
from .hsi_io import FeatureSet, LabeledCube

AXES = (-3, -2, -1)
PATH_RULES = ("ordered", "all")
# a few ulps below 1 so the bound survives any summation order
LP_PEAK = 1.0 - 1e-13


def _triple(value, name) -> tuple[int, int, int]:
    try:
        t = tuple(int(v) for v in value)
    except TypeError:
        raise ConfigError(f"{name} must be a triple of integers") from None
    if len(t) != 3:
        raise ConfigError(f"{name} must have three entries, got {len(t)}")
    return t


def lattice_key(k) -> tuple:
    """Fixed ordering of frequency indices: by squared radius, then lexicographic."""
    return (sum(int(c) * int(c) for c in k), tuple(int(c) for c in k))


def in_half_space(k) -> bool:
    """True when the first nonzero coordinate of ``k`` is positive."""
    for c in k:
        if c != 0:
            return c > 0
    return False


def frequency_lattice(box) -> list[tuple[int, int, int]]:
    """Nonzero integer triples with ``|k_i| <= box_i``, one of each pair {k, -k}."""
    box = _triple(box, "freq_box")
    if min(box) < 0:
        raise ConfigError("freq_box entries must be non-negative")
    ranges = [range(-b, b + 1) for b in box]
    pts = [k for k in itertools.product(*ranges) if in_half_space(k)]
    return sorted(pts, key=lattice_key)


@dataclass(frozen=True)
class StageConfig:
    window: tuple[int, int, int]
    downsample: tuple[int, int, int] = (1, 1, 1)
    freq_box: tuple[int, int, int] | None = None
    lattice: tuple[tuple[int, int, int], ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "window", _triple(self.window, "window"))
        object.__setattr__(self, "downsample", _triple(self.downsample, "downsample"))
        if any(w < 1 or w % 2 == 0 for w in self.window):
            raise ConfigError(f"filter extents must be odd and positive, got {self.window}")
        if any(d < 1 for d in self.downsample):
            raise ConfigError(f"downsample factors must be positive, got {self.downsample}")
        if (self.freq_box is None) == (self.lattice is None):
            raise ConfigError("give exactly one of freq_box or lattice")
        if self.freq_box is not None:
            object.__setattr__(self, "freq_box", _triple(self.freq_box, "freq_box"))
            lat = frequency_lattice(self.freq_box)
        else:
            pts = [_triple(k, "lattice point") for k in self.lattice]
            if len(set(pts)) != len(pts):
                raise ConfigError("duplicate frequency indices in lattice")
            pts = [k for k in pts if k != (0, 0, 0)]
            bad = [k for k in pts if not in_half_space(k)]
            if bad:
                raise ConfigError(
                    f"lattice points {bad} lie outside the half-space selection "
                    "(first nonzero coordinate must be positive)"
                )
            lat = sorted(pts, key=lattice_key)
        object.__setattr__(self, "lattice", tuple(lat))

    def to_dict(self) -> dict:
        d = {"window": list(self.window), "downsample": list(self.downsample)}
        if self.freq_box is not None:
            d["freq_box"] = list(self.freq_box)
        else:
            d["lattice"] = [list(k) for k in self.lattice]
        return d


DEFAULT_STAGES = (
    StageConfig(window=(7, 7, 7), freq_box=(2, 2, 2), downsample=(1, 1, 2)),
    StageConfig(window=(5, 5, 5), freq_box=(2, 2, 2), downsample=(1, 1, 2)),
    StageConfig(window=(3, 3, 3), freq_box=(1, 1, 1), downsample=(1, 1, 1)),
)


@dataclass(frozen=True)
class FstConfig:
    """Scattering configuration.

    ``patch_shape[2]`` may be ``None``, meaning "as many bands as the cube
    has"; :meth:`resolve` fixes it against a concrete band count.
    """

    patch_shape: tuple = (9, 9, None)
    stages: tuple[StageConfig, ...] = DEFAULT_STAGES
    paths: str = "ordered"

    def __post_init__(self):
        ps = tuple(self.patch_shape)
        if len(ps) != 3:
            raise ConfigError("patch_shape must have three entries")
        ps = (int(ps[0]), int(ps[1]), None if ps[2] is None else int(ps[2]))
        object.__setattr__(self, "patch_shape", ps)
        stages = tuple(
            s if isinstance(s, StageConfig) else StageConfig(**s) for s in self.stages
        )
        object.__setattr__(self, "stages", stages)
        if len(stages) != 3:
            raise ConfigError(f"exactly 3 stages required, got {len(stages)}")
        if self.paths not in PATH_RULES:
            raise ConfigError(f"paths must be one of {PATH_RULES}, got {self.paths!r}")
        if ps[0] < 1 or ps[1] < 1 or (ps[2] is not None and ps[2] < 1):
            raise ConfigError(f"patch extents must be positive, got {ps}")
        if ps[2] is not None:
            self.grid_shapes()

    @property
    def resolved(self) -> bool:
        return self.patch_shape[2] is not None

    def spectral_step(self) -> int:
        step = 1
        for st in self.stages[:-1]:
            step *= st.downsample[2]
        return step

    def resolve(self, bands: int) -> "FstConfig":
        """Fix the spectral patch extent for a cube with ``bands`` bands.

        An unset extent becomes the largest band count not above ``bands``
        that the spectral downsampling factors divide.
        """
        if self.resolved:
            if self.patch_shape[2] > bands:
                raise ConfigError(
                    f"spectral patch extent {self.patch_shape[2]} exceeds {bands} bands"
                )
            return self
        step = self.spectral_step()
        b = (bands // step) * step
        if b < 1:
            raise ConfigError(f"{bands} bands too few for spectral downsampling {step}")
        return replace(self, patch_shape=(self.patch_shape[0], self.patch_shape[1], b))

    def grid_shapes(self) -> list[tuple[int, int, int]]:
        """Input grid of each stage, starting from the patch."""
        return list(self._grids)

    @cached_property
    def _grids(self) -> tuple:
        if not self.resolved:
            raise ConfigError("spectral patch extent unresolved; call resolve() first")
        grids = [tuple(self.patch_shape)]
        for t, st in enumerate(self.stages):
            g = grids[-1]
            if any(w > n for w, n in zip(st.window, g)):
                raise ConfigError(
                    f"stage {t + 1}: window {st.window} larger than its grid {g}"
                )
            limit = tuple((n - 1) // 2 for n in g)
            for k in st.lattice:
                if any(abs(c) > lim for c, lim in zip(k, limit)):
                    raise ConfigError(
                        f"stage {t + 1}: frequency {k} outside representable range "
                        f"+/-{limit} of grid {g}"
                    )
            if t < len(self.stages) - 1:
                if any(n % d for n, d in zip(g, st.downsample)):
                    raise ConfigError(
                        f"stage {t + 1}: downsample {st.downsample} does not divide grid {g}"
                    )
                grids.append(tuple(n // d for n, d in zip(g, st.downsample)))
        return tuple(grids)

    def path_pairs(self) -> list[tuple[int, int]]:
        """Index pairs (a, b) into the stage-1 and stage-2 lattices kept as paths."""
        return list(self._paths)

    @cached_property
    def _paths(self) -> tuple:
        lat1, lat2 = self.stages[0].lattice, self.stages[1].lattice
        pairs = []
        for a, k1 in enumerate(lat1):
            for b, k2 in enumerate(lat2):
                if self.paths == "all" or lattice_key(k2) > lattice_key(k1):
                    pairs.append((a, b))
        return tuple(pairs)

    def feature_length(self) -> int:
        return 1 + len(self.stages[0].lattice) + len(self.path_pairs())

    def to_dict(self) -> dict:
        return {
            "patch_shape": list(self.patch_shape),
            "stages": [s.to_dict() for s in self.stages],
            "paths": self.paths,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FstConfig":
        unknown = set(d) - {"patch_shape", "stages", "paths"}
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        kwargs = {}
        if "patch_shape" in d:
            kwargs["patch_shape"] = tuple(d["patch_shape"])
        if "paths" in d:
            kwargs["paths"] = d["paths"]
        if "stages" in d:
            stages = []
            for s in d["stages"]:
                s = dict(s)
                if "freq_box" not in s and "lattice" not in s:
                    raise ConfigError("each stage needs freq_box or lattice")
                try:
                    stages.append(StageConfig(**s))
                except TypeError as exc:
                    raise ConfigError(f"bad stage entry {s}: {exc}") from None
            kwargs["stages"] = tuple(stages)
        return cls(**kwargs)

    @classmethod
    def from_json(cls, path) -> "FstConfig":
        try:
            d = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(d)


def gaussian_window(extent) -> np.ndarray:
    """Separable Gaussian with sigma = extent / 6 per axis, on the given extents."""
    axes = []
    for w in extent:
        o = np.arange(w) - (w - 1) // 2
        sigma = w / 6.0
        axes.append(np.exp(-0.5 * (o / sigma) ** 2))
    return axes[0][:, None, None] * axes[1][None, :, None] * axes[2][None, None, :]


def spatial_atom(window, k, grid) -> np.ndarray:
    """Window modulated by frequency ``k`` and embedded (wrapped) in ``grid``."""
    g = gaussian_window(window)
    out = np.zeros(grid, dtype=np.complex128)
    offs = [np.arange(w) - (w - 1) // 2 for w in window]
    phase = sum(
        np.reshape(2j * np.pi * kc * o / n, shape)
        for kc, o, n, shape in zip(
            k, offs, grid, [(-1, 1, 1), (1, -1, 1), (1, 1, -1)]
        )
    )
    idx = np.ix_(*[o % n for o, n in zip(offs, grid)])
    out[idx] = g * np.exp(phase)
    return out


def _mirror(a: np.ndarray) -> np.ndarray:
    """a(-w) on the circular grid, for a(w) stored in FFT order."""
    return np.roll(np.flip(a, axis=AXES), 1, axis=AXES)


def littlewood_paley(atoms: np.ndarray) -> np.ndarray:
    """Symmetrized frequency coverage of a bank whose atom 0 is the low-pass.

    Wavelet atoms stand for the pair {k, -k}; for real inputs both have the
    same response magnitude, so each contributes the average of
    ``|a(w)|^2`` and ``|a(-w)|^2``.
    """
    lp = np.abs(atoms[0]) ** 2
    if atoms.shape[0] > 1:
        sq = np.abs(atoms[1:]) ** 2
        lp = lp + 0.5 * (sq.sum(axis=0) + _mirror(sq).sum(axis=0))
    return lp


@dataclass(frozen=True)
class FilterBank3D:
    """Frequency-domain atoms on one stage grid; ``atoms[0]`` is the low-pass."""

    grid: tuple[int, int, int]
    window: tuple[int, int, int]
    lattice: tuple[tuple[int, int, int], ...]
    atoms: np.ndarray = field(repr=False)
    scale: float

    @property
    def lowpass(self) -> np.ndarray:
        return self.atoms[0]

    @property
    def wavelets(self) -> np.ndarray:
        return self.atoms[1:]

    def littlewood_paley(self) -> np.ndarray:
        return littlewood_paley(self.atoms)


def build_filter_bank(cfg: FstConfig, stage: int) -> FilterBank3D:
    """Filter bank for stage ``stage`` (0-based) on that stage's input grid."""
    if not 0 <= stage < len(cfg.stages):
        raise ConfigError(f"stage index {stage} out of range")
    grid = cfg.grid_shapes()[stage]
    st = cfg.stages[stage]
    freqs = [(0, 0, 0)] + list(st.lattice)
    atoms = np.stack([sfft.fftn(spatial_atom(st.window, k, grid)) for k in freqs])
    scale = np.sqrt(LP_PEAK / littlewood_paley(atoms).max())
    atoms = atoms * scale
    atoms.setflags(write=False)
    return FilterBank3D(grid, st.window, st.lattice, atoms, float(scale))


def build_filter_banks(cfg: FstConfig) -> tuple[FilterBank3D, ...]:
    return tuple(build_filter_bank(cfg, t) for t in range(len(cfg.stages)))


def _downsample(U: np.ndarray, factors) -> np.ndarray:
    d0, d1, d2 = factors
    return U[..., ::d0, ::d1, ::d2]


def _check_patch(patch, cfg):
    f = np.asarray(patch, dtype=np.float64)
    if f.shape != tuple(cfg.patch_shape):
        raise ShapeError(f"patch shape {f.shape} != configured {cfg.patch_shape}")
    return f


def _first_order(f, banks, cfg):
    F = sfft.fftn(f)
    U1 = np.abs(sfft.ifftn(F[None] * banks[0].wavelets, axes=AXES))
    return F, _downsample(U1, cfg.stages[0].downsample)


def _second_order(U1, banks, cfg, pairs):
    if not pairs:
        return np.zeros((0,) + cfg.grid_shapes()[2])
    F1 = sfft.fftn(U1, axes=AXES)
    a_idx = np.array([a for a, _ in pairs], dtype=np.int64)
    b_idx = np.array([b for _, b in pairs], dtype=np.int64)
    out = np.empty((len(pairs),) + cfg.grid_shapes()[2])
    # chunked so that large spectral grids stay within memory
    step = max(1, (1 << 22) // int(np.prod(U1.shape[1:])))
    for lo in range(0, len(pairs), step):
        sl = slice(lo, lo + step)
        U2 = np.abs(sfft.ifftn(F1[a_idx[sl]] * banks[1].wavelets[b_idx[sl]], axes=AXES))
        out[sl] = _downsample(U2, cfg.stages[1].downsample)
    return out


def _lowpass(U: np.ndarray, bank: FilterBank3D) -> np.ndarray:
    """Circular convolution of real ``U`` with the bank's (real, even) low-pass."""
    half = bank.lowpass[..., : bank.grid[2] // 2 + 1]
    return sfft.irfftn(sfft.rfftn(U, axes=AXES) * half, s=bank.grid, axes=AXES)


def scattering_maps(patch, banks, cfg: FstConfig) -> list[np.ndarray]:
    """Low-pass outputs of orders 0, 1 and 2 before spatial averaging.

    Returns ``[S0, S1, S2]`` with shapes ``grid0``, ``(|L1|,) + grid1`` and
    ``(n_paths,) + grid2``. Second-order paths follow ``cfg.path_pairs()``.
    """
    f = _check_patch(patch, cfg)
    _, U1 = _first_order(f, banks, cfg)
    U2 = _second_order(U1, banks, cfg, cfg.path_pairs())
    S0 = _lowpass(f, banks[0])
    S1 = _lowpass(U1, banks[1])
    S2 = _lowpass(U2, banks[2])
    return [S0, S1, S2]


def scatter_patch(patch, banks, cfg: FstConfig) -> np.ndarray:
    """Scattering coefficients of one patch: ``[order0, order1..., order2...]``."""
    f = _check_patch(patch, cfg)
    _, U1 = _first_order(f, banks, cfg)
    U2 = _second_order(U1, banks, cfg, cfg.path_pairs())
    # the mean of a circular convolution is the input mean times the filter's DC gain
    dc = [float(b.lowpass[0, 0, 0].real) for b in banks]
    return np.concatenate(
        [
            [dc[0] * f.mean()],
            dc[1] * U1.mean(axis=AXES),
            dc[2] * U2.mean(axis=AXES),
        ]
    )


def coefficient_index(cfg: FstConfig) -> list[tuple]:
    """Path label of each coefficient: ``()``, ``(k1,)`` or ``(k1, k2)``."""
    lat1, lat2 = cfg.stages[0].lattice, cfg.stages[1].lattice
    idx = [()]
    idx += [(k,) for k in lat1]
    idx += [(lat1[a], lat2[b]) for a, b in cfg.path_pairs()]
    return idx


def extract_patch(padded: np.ndarray, r: int, c: int, cfg: FstConfig, band_start: int):
    s0, s1, b = cfg.patch_shape
    return padded[r : r + s0, c : c + s1, band_start : band_start + b]


def pad_cube(cube: np.ndarray, cfg: FstConfig) -> np.ndarray:
    """Mirror-pad the spatial axes by the patch radius."""
    r0, r1 = cfg.patch_shape[0] // 2, cfg.patch_shape[1] // 2
    H, W = cube.shape[:2]
    if r0 > H or r1 > W:
        raise ConfigError(
            f"patch {cfg.patch_shape[:2]} too large for a {H}x{W} cube under mirror padding"
        )
    return np.pad(cube, ((r0, r0), (r1, r1), (0, 0)), mode="symmetric")


def scatter_cube(c: LabeledCube, cfg: FstConfig | None = None, threads: int = 1) -> FeatureSet:
    """Scattering features of every labeled pixel, rows in scan order."""
    cfg = (cfg or FstConfig()).resolve(c.cube.shape[2])
    s0, s1, b = cfg.patch_shape
    if s0 % 2 == 0 or s1 % 2 == 0:
        raise ConfigError(f"spatial patch extents must be odd, got {(s0, s1)}")
    banks = build_filter_banks(cfg)
    padded = pad_cube(np.asarray(c.cube, dtype=np.float64), cfg)
    band_start = (c.cube.shape[2] - b) // 2
    rr, cc = c.labeled_pixels()

    def one(i):
        return scatter_patch(extract_patch(padded, rr[i], cc[i], cfg, band_start), banks, cfg)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        rows = list(pool.map(one, range(rr.size)))
    class_ids, y = np.unique(c.labels[rr, cc], return_inverse=True)
    return FeatureSet(np.stack(rows), y.reshape(-1), class_ids, normalized=False)

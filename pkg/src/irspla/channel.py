"""IRS-assisted MIMO channel simulation and fingerprint estimation.

A transmitter (Alice or Eve) with an ``n_t``-element linear array reaches
Bob's ``n_r``-element linear array through an ``n_y x n_z`` planar IRS:

    Q = H Psi G        (n_r x n), (n x n), (n x n_t)

``G`` and ``H`` are Rician: a geometric line-of-sight part built from
far-field array responses plus i.i.d. Rayleigh scattering, each scaled by the
3GPP TR 38.901 path loss. The direct link ``D`` is pure Rayleigh and is only
used by the no-IRS baseline. Bob estimates the channel by pilot inversion
and the fingerprint is the real/imaginary stacking of that estimate.
"""

from __future__ import annotations

import hashlib
import json
import math
from typing import Any

import attrs
import numpy as np
import numpy.typing as npt

from .errors import DimensionMismatch, SingularPilot

SPEED_OF_LIGHT = 299_792_458.0
PILOT_CONDITION_LIMIT = 1e6
LINKS = ("G", "H", "D")
TRANSMITTERS = ("alice", "eve")
MODES = ("irs", "direct")

ComplexArray = npt.NDArray[np.complex128]


# --- path loss and IRS element response -------------------------------------


def path_loss_db(distance: npt.ArrayLike, carrier_ghz: float, los: bool = True) -> npt.NDArray[np.float64]:
    """3GPP TR 38.901 path loss in dB.

    LoS: ``32.4 + 21 log10(d) + 20 log10(f_c)``.
    NLoS: ``32.4 + 31.9 log10(d) + 20 log10(f_c)``.

    Args:
        distance: Path length in metres, > 0.
        carrier_ghz: Carrier frequency in GHz, > 0.
        los: Line-of-sight (True) or non-line-of-sight.

    Raises:
        ValueError: If a distance or the frequency is not positive.
    """
    d = np.asarray(distance, dtype=np.float64)
    if np.any(d <= 0.0) or carrier_ghz <= 0.0:
        msg = f"path loss needs positive distance and frequency, got {distance} m and {carrier_ghz} GHz"
        raise ValueError(msg)
    slope = 21.0 if los else 31.9
    return 32.4 + slope * np.log10(d) + 20.0 * math.log10(carrier_ghz)


def db_to_gain(db: npt.ArrayLike) -> npt.NDArray[np.float64]:
    """Linear power gain ``10^(-PL/10)`` of a path loss in dB."""
    return 10.0 ** (-np.asarray(db, dtype=np.float64) / 10.0)


def irs_amplitude(
    theta: npt.ArrayLike, a_min: float = 0.2, omega: float = 0.0, v: float = 1.6
) -> npt.NDArray[np.float64]:
    """Phase-dependent reflection amplitude of an IRS element.

    ``A(theta) = (1 - a_min) ((sin(theta - omega) + 1) / 2)^v + a_min``,
    which lies in ``[a_min, 1]``.
    """
    theta = np.asarray(theta, dtype=np.float64)
    return (1.0 - a_min) * ((np.sin(theta - omega) + 1.0) / 2.0) ** v + a_min


# --- value types -------------------------------------------------------------


def _as_position(value: npt.ArrayLike) -> npt.NDArray[np.float64]:
    arr = np.asarray(value, dtype=np.float64).ravel()
    if arr.shape != (3,):
        msg = f"positions are 3-D coordinates, got {value!r}"
        raise ValueError(msg)
    return arr


def _check_count(_instance: object, attribute: attrs.Attribute, value: int) -> None:
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        msg = f"{attribute.name} must be a positive integer, got {value!r}"
        raise ValueError(msg)


def _check_nonnegative(_instance: object, attribute: attrs.Attribute, value: float) -> None:
    if not (math.isfinite(value) and value >= 0.0):
        msg = f"{attribute.name} must be finite and non-negative, got {value}"
        raise ValueError(msg)


def _check_positive(_instance: object, attribute: attrs.Attribute, value: float) -> None:
    if not (math.isfinite(value) and value > 0.0):
        msg = f"{attribute.name} must be finite and positive, got {value}"
        raise ValueError(msg)


def _position_field(default: tuple[float, float, float]) -> Any:
    return attrs.field(default=default, converter=_as_position, eq=attrs.cmp_using(eq=np.array_equal))


@attrs.frozen
class Geometry:
    """Node positions (metres), array sizes and carrier.

    Bob and the transmitters use uniform linear arrays along the x axis. The
    IRS is a planar array spanning ``irs_axis`` and z. All element spacings
    are half a wavelength.

    Raises:
        ValueError: If two nodes coincide with the IRS or Bob, or a size is invalid.
    """

    bob: npt.NDArray[np.float64] = _position_field((0.0, 0.0, 0.0))
    irs: npt.NDArray[np.float64] = _position_field((10.0, 10.0, 3.0))
    alice: npt.NDArray[np.float64] = _position_field((20.0, 5.0, 1.5))
    eve: npt.NDArray[np.float64] = _position_field((20.0, 8.0, 1.5))
    n_t: int = attrs.field(default=2, validator=_check_count)
    n_r: int = attrs.field(default=4, validator=_check_count)
    n_y: int = attrs.field(default=8, validator=_check_count)
    n_z: int = attrs.field(default=32, validator=_check_count)
    carrier_hz: float = attrs.field(default=3.5e9, converter=float, validator=_check_positive)
    irs_axis: str = attrs.field(default="x", validator=attrs.validators.in_(("x", "y")))

    def __attrs_post_init__(self) -> None:
        """Every link must have positive length."""
        for a, b in (("bob", "irs"), ("alice", "irs"), ("eve", "irs"), ("alice", "bob"), ("eve", "bob")):
            if self.distance(a, b) <= 0.0:
                msg = f"{a} and {b} coincide"
                raise ValueError(msg)

    def position(self, node: str) -> npt.NDArray[np.float64]:
        """Coordinates of ``node``."""
        return getattr(self, node)

    def distance(self, a: str, b: str) -> float:
        """Euclidean distance between two nodes."""
        return float(np.linalg.norm(self.position(a) - self.position(b)))

    @property
    def n_elements(self) -> int:
        """IRS elements ``n = n_y n_z``."""
        return self.n_y * self.n_z

    @property
    def wavelength(self) -> float:
        """Carrier wavelength in metres."""
        return SPEED_OF_LIGHT / self.carrier_hz

    @property
    def spacing(self) -> float:
        """Half-wavelength element spacing."""
        return self.wavelength / 2.0

    @property
    def carrier_ghz(self) -> float:
        """Carrier in GHz, the unit of the path-loss formula."""
        return self.carrier_hz / 1e9

    @property
    def fingerprint_length(self) -> int:
        """``2 n_r n_t``."""
        return 2 * self.n_r * self.n_t


def _as_phases(value: npt.ArrayLike) -> npt.NDArray[np.float64]:
    return np.atleast_1d(np.asarray(value, dtype=np.float64))


@attrs.frozen
class IrsConfig:
    """IRS phase shifts and the amplitude model of its elements.

    Args:
        phases: Per-element phase ``theta_n`` in radians.
        a_min: Minimum amplitude, in ``[0, 1]``.
        omega: Phase offset of the amplitude curve.
        v: Steepness of the amplitude curve, > 0.
    """

    phases: npt.NDArray[np.float64] = attrs.field(converter=_as_phases, eq=attrs.cmp_using(eq=np.array_equal))
    a_min: float = attrs.field(default=0.2, converter=float)
    omega: float = attrs.field(default=0.0, converter=float)
    v: float = attrs.field(default=1.6, converter=float, validator=_check_positive)

    @a_min.validator
    def _check_a_min(self, _attribute: attrs.Attribute, value: float) -> None:
        if not 0.0 <= value <= 1.0:
            msg = f"a_min must lie in [0, 1], got {value}"
            raise ValueError(msg)

    @classmethod
    def uniform(cls, theta: float, n: int, **kwargs: float) -> IrsConfig:
        """All ``n`` elements at the same phase ``theta``."""
        return cls(np.full(n, float(theta)), **kwargs)

    @property
    def n_elements(self) -> int:
        """Number of elements."""
        return int(self.phases.shape[0])

    def amplitudes(self) -> npt.NDArray[np.float64]:
        """``A_n(theta_n)`` per element."""
        return irs_amplitude(self.phases, self.a_min, self.omega, self.v)


def irs_response(config: IrsConfig) -> ComplexArray:
    """The diagonal of ``Psi``: ``psi_n = A_n(theta_n) exp(j theta_n)``."""
    return config.amplitudes() * np.exp(1j * config.phases)


@attrs.frozen
class FadingParams:
    """Rician factors, noise and CSI-error variances.

    ``bandwidth_hz`` is carried as metadata only.
    """

    kappa_h: float = attrs.field(default=3.0, converter=float, validator=_check_nonnegative)
    kappa_g: float = attrs.field(default=4.0, converter=float, validator=_check_nonnegative)
    noise_var: float = attrs.field(default=1e-20, converter=float, validator=_check_nonnegative)
    csi_var_h: float = attrs.field(default=0.0, converter=float, validator=_check_nonnegative)
    csi_var_g: float = attrs.field(default=0.0, converter=float, validator=_check_nonnegative)
    bandwidth_hz: float = attrs.field(default=1e6, converter=float, validator=_check_positive)

    @property
    def perfect_csi(self) -> bool:
        """True when both CSI-error variances are zero."""
        return self.csi_var_h == 0.0 and self.csi_var_g == 0.0


def _default_irs(instance: ChannelScenario) -> IrsConfig:
    return IrsConfig.uniform(0.0, instance.geometry.n_elements)


@attrs.frozen
class ChannelScenario:
    """Everything needed to generate a fingerprint dataset.

    Args:
        geometry: Node layout and array sizes.
        irs: IRS configuration; defaults to all phases 0.
        fading: Fading and error parameters.
        mode: ``"irs"`` for the cascaded channel, ``"direct"`` for the
            Rayleigh direct link without IRS.
        pilot_power: Power ``p`` of the pilot ``sqrt(p) I``.
    """

    geometry: Geometry = attrs.field(factory=Geometry)
    irs: IrsConfig = attrs.field(default=attrs.Factory(_default_irs, takes_self=True))
    fading: FadingParams = attrs.field(factory=FadingParams)
    mode: str = attrs.field(default="irs", validator=attrs.validators.in_(MODES))
    pilot_power: float = attrs.field(default=1.0, converter=float, validator=_check_positive)

    def __attrs_post_init__(self) -> None:
        """The IRS configuration must match the element count."""
        if self.irs.n_elements != self.geometry.n_elements:
            msg = f"IRS has {self.irs.n_elements} phases but the geometry has {self.geometry.n_elements} elements"
            raise DimensionMismatch(msg)

    def pilot(self) -> ComplexArray:
        """The ``n_t x n_t`` pilot matrix."""
        return math.sqrt(self.pilot_power) * np.eye(self.geometry.n_t, dtype=np.complex128)

    def to_dict(self) -> dict[str, Any]:
        """Plain JSON-ready parameters."""

        def plain(_inst: object, _attr: attrs.Attribute, value: object) -> object:
            if isinstance(value, np.ndarray):
                return value.tolist()
            return value

        return attrs.asdict(self, value_serializer=plain)


def scenario_hash(scenario: ChannelScenario) -> str:
    """sha256 of the scenario's canonical JSON."""
    canonical = json.dumps(scenario.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def scenario_from_dict(data: dict[str, Any]) -> ChannelScenario:
    """Inverse of :meth:`ChannelScenario.to_dict`."""
    return ChannelScenario(
        geometry=Geometry(**data["geometry"]),
        irs=IrsConfig(**data["irs"]),
        fading=FadingParams(**data["fading"]),
        mode=data["mode"],
        pilot_power=data["pilot_power"],
    )


# --- array responses and channel draws ---------------------------------------


_AXES = {"x": np.array([1.0, 0.0, 0.0]), "y": np.array([0.0, 1.0, 0.0]), "z": np.array([0.0, 0.0, 1.0])}


def ula_positions(n: int, spacing: float, axis: str = "x") -> npt.NDArray[np.float64]:
    """``(n, 3)`` element offsets of a centred uniform linear array."""
    return np.outer((np.arange(n) - (n - 1) / 2.0) * spacing, _AXES[axis])


def upa_positions(n_a: int, n_z: int, spacing: float, axis: str = "x") -> npt.NDArray[np.float64]:
    """``(n_a n_z, 3)`` offsets of a centred planar array in the ``axis``-z plane.

    Element ``i * n_z + k`` sits at column ``i`` along ``axis`` and row ``k`` along z.
    """
    a = (np.arange(n_a) - (n_a - 1) / 2.0) * spacing
    z = (np.arange(n_z) - (n_z - 1) / 2.0) * spacing
    aa, zz = np.meshgrid(a, z, indexing="ij")
    return np.outer(aa.ravel(), _AXES[axis]) + np.outer(zz.ravel(), _AXES["z"])


def array_response(positions: npt.ArrayLike, direction: npt.ArrayLike, wavelength: float) -> ComplexArray:
    """Far-field response ``exp(j 2 pi / lambda p.u)`` of each element towards ``direction``."""
    u = np.asarray(direction, dtype=np.float64)
    u = u / np.linalg.norm(u)
    return np.exp(1j * 2.0 * np.pi / wavelength * (np.asarray(positions, dtype=np.float64) @ u))


def _link_ends(geometry: Geometry, link: str, transmitter: str) -> tuple[str, str]:
    if link not in LINKS:
        msg = f"link must be one of {LINKS}, got {link!r}"
        raise ValueError(msg)
    if transmitter not in TRANSMITTERS:
        msg = f"transmitter must be one of {TRANSMITTERS}, got {transmitter!r}"
        raise ValueError(msg)
    return {"G": (transmitter, "irs"), "H": ("irs", "bob"), "D": (transmitter, "bob")}[link]


def _array(geometry: Geometry, node: str) -> npt.NDArray[np.float64]:
    if node == "irs":
        return upa_positions(geometry.n_y, geometry.n_z, geometry.spacing, geometry.irs_axis)
    return ula_positions(geometry.n_r if node == "bob" else geometry.n_t, geometry.spacing)


def los_component(geometry: Geometry, link: str, transmitter: str = "alice") -> ComplexArray:
    """Unit-modulus line-of-sight matrix ``a_rx(u_rx) a_tx(u_tx)^H`` of a link."""
    source, sink = _link_ends(geometry, link, transmitter)
    towards_sink = geometry.position(sink) - geometry.position(source)
    a_rx = array_response(_array(geometry, sink), -towards_sink, geometry.wavelength)
    a_tx = array_response(_array(geometry, source), towards_sink, geometry.wavelength)
    return np.outer(a_rx, a_tx.conj())


def complex_normal(rng: np.random.Generator, shape: tuple[int, ...], variance: float = 1.0) -> ComplexArray:
    """Circularly-symmetric ``CN(0, variance)`` draws."""
    scale = math.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def sample_channel(
    geometry: Geometry,
    fading: FadingParams,
    link: str,
    rng: np.random.Generator,
    transmitter: str = "alice",
) -> ComplexArray:
    """Draw one realisation of link ``"G"`` (transmitter to IRS), ``"H"`` (IRS to Bob) or ``"D"`` (direct).

    ``G`` and ``H`` are ``sqrt(PL_LoS k/(1+k)) A + sqrt(PL_NLoS/(1+k)) S`` with
    ``A`` the line-of-sight matrix and ``S`` i.i.d. ``CN(0, 1)``. ``D`` is
    ``sqrt(PL_NLoS) S``.
    """
    source, sink = _link_ends(geometry, link, transmitter)
    d = geometry.distance(source, sink)
    nlos_gain = float(db_to_gain(path_loss_db(d, geometry.carrier_ghz, los=False)))
    rows = geometry.n_r if sink == "bob" else geometry.n_elements
    cols = geometry.n_elements if source == "irs" else geometry.n_t
    scatter = complex_normal(rng, (rows, cols))
    if link == "D":
        return math.sqrt(nlos_gain) * scatter
    kappa = fading.kappa_g if link == "G" else fading.kappa_h
    los_gain = float(db_to_gain(path_loss_db(d, geometry.carrier_ghz, los=True)))
    return math.sqrt(los_gain * kappa / (1.0 + kappa)) * los_component(
        geometry, link, transmitter
    ) + math.sqrt(nlos_gain / (1.0 + kappa)) * scatter


def cascade_channel(h: npt.ArrayLike, psi: IrsConfig | npt.ArrayLike, g: npt.ArrayLike) -> ComplexArray:
    """``Q = H diag(psi) G``.

    Raises:
        DimensionMismatch: If the shapes do not chain.
    """
    h = np.atleast_2d(np.asarray(h, dtype=np.complex128))
    g = np.atleast_2d(np.asarray(g, dtype=np.complex128))
    diag = irs_response(psi) if isinstance(psi, IrsConfig) else np.atleast_1d(np.asarray(psi, dtype=np.complex128))
    if not (h.shape[1] == diag.shape[0] == g.shape[0]):
        msg = f"cannot chain {h.shape} x diag({diag.shape[0]}) x {g.shape}"
        raise DimensionMismatch(msg)
    return (h * diag[np.newaxis, :]) @ g


# --- estimation and stacking -------------------------------------------------


def stack_fingerprint(matrix: npt.ArrayLike) -> npt.NDArray[np.float64]:
    """Real parts row-major, then imaginary parts row-major."""
    m = np.asarray(matrix, dtype=np.complex128)
    return np.concatenate([m.real.ravel(), m.imag.ravel()])


def unstack_fingerprint(vector: npt.ArrayLike, n_r: int, n_t: int) -> ComplexArray:
    """Inverse of :func:`stack_fingerprint`.

    Raises:
        DimensionMismatch: If the length is not ``2 n_r n_t``.
    """
    v = np.asarray(vector, dtype=np.float64).ravel()
    size = n_r * n_t
    if v.shape[0] != 2 * size:
        msg = f"expected {2 * size} entries for a {n_r}x{n_t} channel, got {v.shape[0]}"
        raise DimensionMismatch(msg)
    return (v[:size] + 1j * v[size:]).reshape(n_r, n_t)


@attrs.frozen
class CsiError:
    """Multiplicative estimation error on the cascaded components.

    ``H`` and ``G`` are perturbed entrywise as ``H * E_H`` and ``G * E_G``
    with each error entry ``CN(1, var)``.
    """

    var_h: float
    var_g: float
    h: ComplexArray = attrs.field(eq=False)
    psi: ComplexArray = attrs.field(eq=False)
    g: ComplexArray = attrs.field(eq=False)


def _perturb(rng: np.random.Generator, matrix: ComplexArray, variance: float) -> ComplexArray:
    if variance == 0.0:
        return matrix
    return matrix * (1.0 + complex_normal(rng, matrix.shape, variance))


@attrs.frozen(eq=False)
class FingerprintSample:
    """One estimated channel, stacked to a real vector, with its identity."""

    vector: npt.NDArray[np.float64]
    identity: int
    csi_var: float = 0.0
    scenario_hash: str = ""


def estimate_fingerprint(
    q: npt.ArrayLike,
    pilot: npt.ArrayLike,
    noise_var: float,
    rng: np.random.Generator,
    csi_error: CsiError | None = None,
    *,
    identity: int = 0,
    digest: str = "",
) -> FingerprintSample:
    """Bob's least-squares channel estimate ``Y X_p^-1`` with ``Y = Q X_p + W``.

    ``W`` is drawn first, then any CSI errors, so perfect and imperfect
    estimates from the same stream share their noise. A CSI-error variance
    of 0 draws nothing.

    Raises:
        SingularPilot: If the pilot's condition number is at least 1e6.
    """
    pilot = np.atleast_2d(np.asarray(pilot, dtype=np.complex128))
    cond = np.linalg.cond(pilot)
    if not np.isfinite(cond) or cond >= PILOT_CONDITION_LIMIT:
        msg = f"pilot condition number {cond:.3g} is too large to invert"
        raise SingularPilot(msg)
    q = np.atleast_2d(np.asarray(q, dtype=np.complex128))
    noise = complex_normal(rng, (q.shape[0], pilot.shape[1]), noise_var)
    csi_var = 0.0
    if csi_error is not None:
        h = _perturb(rng, csi_error.h, csi_error.var_h)
        g = _perturb(rng, csi_error.g, csi_error.var_g)
        q = cascade_channel(h, csi_error.psi, g)
        csi_var = max(csi_error.var_h, csi_error.var_g)
    received = q @ pilot + noise
    estimate = np.linalg.solve(pilot.T, received.T).T
    return FingerprintSample(stack_fingerprint(estimate), identity, csi_var, digest)

"""Multi-cell massive-MIMO uplink training model.

Cell ``l`` has ``N`` antennas and serves ``N_U`` single-antenna users.  All
users send orthogonal pilots ``Θ`` (``N_U × τ``, ``ΘΘ^H = τI``) and the
base station observes

    Y_l = Σ_m G_{l,m} Θ + W_l,     G_{l,m} = C^{1/2} H_{l,m} D_{l,m},

with ``H`` i.i.d. unit-variance complex Gaussian and ``D_{l,m}`` diagonal
attenuations.  Row ``i`` of ``Y_l`` plays the role of the observation vector
``y_i`` of a task with ``K = N_U`` and ``L = τ``.
"""
from dataclasses import dataclass, field

import numpy as np

from ..correlation import CorrelationModel
from ..linalg import sqrtm_psd
from ..task import TaskModel

__all__ = [
    "MimoScenario",
    "NetworkRealization",
    "generate_network",
    "pilot_matrix",
    "output_covariance",
    "b_phi_coeffs",
    "mimo_task_model",
    "simulate_channel_outputs",
    "mmse_channel_estimate",
    "hex_centers",
    "pathloss",
]


@dataclass(frozen=True)
class MimoScenario:
    """Static parameters of the multi-cell network.

    The default attenuation law ``d = z / ρ²`` follows the amplitude model of
    the reference setup.  Classic power-law studies often use an exponent
    near 3.8 on power instead; set ``pathloss_exponent`` to explore that.
    """

    n_cells: int = 7
    n_users: int = 10
    n_pilots: int = 40
    noise_power: float = 1e-3
    cell_radius: float = 400.0
    exclusion_radius: float = 20.0
    shadow_std_db: float = 8.0
    pathloss_exponent: float = 2.0
    correlation: CorrelationModel = field(default_factory=CorrelationModel)
    n_antennas: int = 100

    def __post_init__(self):
        if self.n_cells < 1:
            raise ValueError("need at least one cell")
        if self.n_users < 1 or self.n_antennas < 1:
            raise ValueError("need at least one user and one antenna")
        if self.n_pilots < self.n_users:
            raise ValueError(
                f"pilot length {self.n_pilots} must be at least the number of users {self.n_users}"
            )
        if not (self.cell_radius > 0 and 0 <= self.exclusion_radius < self.cell_radius):
            raise ValueError("need 0 <= exclusion radius < cell radius")
        if self.noise_power < 0 or self.shadow_std_db < 0:
            raise ValueError("noise power and shadowing std must be nonnegative")


@dataclass(frozen=True, eq=False)
class NetworkRealization:
    """Attenuations ``d[l, m, u]`` from user ``u`` of cell ``m`` to base station ``l``.

    For every ``l`` the own-cell coefficients ``d[l, l, :]`` are sorted in
    descending order.
    """

    d: np.ndarray
    seed: object = None

    def __post_init__(self):
        d = np.asarray(self.d, dtype=float)
        if d.ndim != 3 or d.shape[0] != d.shape[1]:
            raise ValueError("attenuation tensor must have shape (N_C, N_C, N_U)")
        if not np.all(np.isfinite(d)) or np.any(d < 0):
            raise ValueError("attenuations must be finite and nonnegative")
        d.setflags(write=False)
        object.__setattr__(self, "d", d)

    def D(self, l, m):
        return np.diag(self.d[l, m])


def hex_centers(n_cells, radius):
    """Base-station positions: a central cell and its rings of neighbours."""
    # flat-top hexagons in axial coordinates; centre spacing is sqrt(3) R
    dirs = [(1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1)]
    axial = [(0, 0)]
    ring = 1
    while len(axial) < n_cells:
        q, r = ring * dirs[4][0], ring * dirs[4][1]
        for side in range(6):
            for _ in range(ring):
                axial.append((q, r))
                q, r = q + dirs[side][0], r + dirs[side][1]
        ring += 1
    a = np.asarray(axial[:n_cells], dtype=float)
    x = radius * 1.5 * a[:, 0]
    y = radius * np.sqrt(3) * (a[:, 1] + a[:, 0] / 2)
    return np.stack([x, y], axis=1)


def _in_hexagon(x, y, R):
    # flat-top hexagon centred at the origin with circumradius R
    ax, ay = np.abs(x), np.abs(y)
    return (ay <= np.sqrt(3) / 2 * R) & (np.sqrt(3) * ax + ay <= np.sqrt(3) * R)


def _sample_hex(rng, count, R, r_excl):
    out = np.empty((0, 2))
    while out.shape[0] < count:
        need = count - out.shape[0]
        pts = rng.uniform(-R, R, size=(2 * need + 4, 2))
        ok = _in_hexagon(pts[:, 0], pts[:, 1], R) & (np.hypot(pts[:, 0], pts[:, 1]) > r_excl)
        out = np.vstack([out, pts[ok]])
    return out[:count]


def pathloss(rho, z=1.0, exponent=2.0):
    """Attenuation ``d = z / ρ^e``."""
    return np.asarray(z) / np.asarray(rho, dtype=float) ** exponent


def generate_network(scn, seed):
    """Draw user positions and shadowing for every cell.

    Users are uniform in their hexagonal cell outside the exclusion disk; the
    attenuation is ``d = z / ρ^e`` with ``10 log10 z`` Gaussian of standard
    deviation ``shadow_std_db``.
    """
    rng = np.random.default_rng(seed)
    Nc, Nu = scn.n_cells, scn.n_users
    centers = hex_centers(Nc, scn.cell_radius)
    users = np.stack([
        centers[m] + _sample_hex(rng, Nu, scn.cell_radius, scn.exclusion_radius)
        for m in range(Nc)
    ])  # (Nc, Nu, 2)
    diff = users[None, :, :, :] - centers[:, None, None, :]
    rho = np.hypot(diff[..., 0], diff[..., 1])  # (l, m, u)
    z = 10.0 ** (scn.shadow_std_db / 10.0 * rng.standard_normal(rho.shape))
    d = pathloss(rho, z, scn.pathloss_exponent)
    # users are labelled per serving cell; the serving base station l only
    # reorders its own users, which we apply to all l consistently per cell
    d_sorted = np.empty_like(d)
    for m in range(Nc):
        order = np.argsort(-d[m, m], kind="stable")
        d_sorted[:, m, :] = d[:, m, order]
    return NetworkRealization(d_sorted, seed=seed)


def pilot_matrix(tau, n_users):
    """First ``n_users`` rows of the ``τ``-point DFT matrix (unit-modulus entries)."""
    if tau < n_users:
        raise ValueError(f"need tau >= n_users, got tau={tau}, n_users={n_users}")
    u = np.arange(n_users)[:, None]
    t = np.arange(tau)[None, :]
    return np.exp(-2j * np.pi * u * t / tau)


def output_covariance(net, l, scn):
    """Per-antenna covariance ``Σ_Y = Σ_m Θ^T D²_{l,m} Θ* + σ_W² I`` of a row of ``Y_l``."""
    theta = pilot_matrix(scn.n_pilots, scn.n_users)
    p = np.sum(net.d[l] ** 2, axis=0)  # Σ_m d²_{l,m,u}
    S = (theta.T * p) @ theta.conj() + scn.noise_power * np.eye(scn.n_pilots)
    return 0.5 * (S + S.conj().T)


def b_phi_coeffs(net, l, scn):
    """Return ``(b, φ)`` with ``b_u = τ d²_u / (σ_W² + τ Σ_m d²_{m,u})`` and ``φ_u = sqrt(b_u) d_u``."""
    tau = scn.n_pilots
    own = net.d[l, l]
    total = scn.noise_power + tau * np.sum(net.d[l] ** 2, axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        b = np.where(total > 0, tau * own**2 / total, 0.0)
    return b, np.sqrt(b) * own


def mimo_task_model(net, l, scn):
    """Channel estimation at base station ``l`` as a generic task.

    ``K = N_U``, ``L = τ``, ``Γ = τ⁻¹ B Θ*``, ``Σ_y = Σ_Y`` and ``Σ_g = D²_{l,l}``.
    """
    tau = scn.n_pilots
    theta = pilot_matrix(tau, scn.n_users)
    b, _ = b_phi_coeffs(net, l, scn)
    gamma = (b[:, None] * theta.conj()) / tau
    return TaskModel(gamma, output_covariance(net, l, scn), np.diag(net.d[l, l] ** 2),
                     scn.correlation)


def _cgauss(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def simulate_channel_outputs(net, l, scn, rng, trials=None, c_sqrt=None):
    """Draw the own-cell channel and the received pilots.

    Interference from other cells enters only through its sum, so it is
    drawn as a single Gaussian matrix with column variances
    ``Σ_{m≠l} d²_{l,m,u}``.

    Parameters
    ----------
    trials : int, optional
        Draw a batch; outputs then gain a leading axis.
    c_sqrt : ndarray, optional
        Precomputed ``C_N^{1/2}``.

    Returns
    -------
    G : ndarray, shape ([trials,] N, N_U)
    Y : ndarray, shape ([trials,] N, τ)
    """
    N, Nu, tau = scn.n_antennas, scn.n_users, scn.n_pilots
    batch = () if trials is None else (int(trials),)
    theta = pilot_matrix(tau, Nu)
    own = net.d[l, l]
    inter = np.sqrt(np.maximum(np.sum(net.d[l] ** 2, axis=0) - own**2, 0.0))
    H = _cgauss(rng, batch + (N, Nu))
    Hi = _cgauss(rng, batch + (N, Nu))
    W = _cgauss(rng, batch + (N, tau)) * np.sqrt(scn.noise_power)
    G = H * own
    Y = (G + Hi * inter) @ theta + W
    if not scn.correlation.is_white:
        if c_sqrt is None:
            c_sqrt = sqrtm_psd(scn.correlation.toeplitz(N))
        G = c_sqrt @ G
        Y = c_sqrt @ Y
    return G, Y


def mmse_channel_estimate(Y, net, l, scn):
    """Unquantized MMSE estimate ``G̃ = τ⁻¹ Y Θ^H B``."""
    tau = scn.n_pilots
    theta = pilot_matrix(tau, scn.n_users)
    b, _ = b_phi_coeffs(net, l, scn)
    return (np.asarray(Y) @ theta.conj().T) * (b / tau)

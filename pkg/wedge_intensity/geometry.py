"""
Geometry - Model construction and coordinate transforms.

The log-distances to default X = (X1, X2) are mapped to Z = Sigma^-1 X, a Brownian
motion with unit diffusion and drift m = Sigma^-1 mu. In these coordinates the two
firms are alive exactly while Z stays in the wedge {0 < theta < alpha}: firm 2
defaults on the theta = 0 edge (Z2 = 0), firm 1 on the theta = alpha edge.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from .errors import DomainError, InvalidStateError, SingularCovarianceError

logger = logging.getLogger(__name__)

# largest |rho| for which Sigma is treated as invertible (exclusive)
RHO_CAP = 1.0 - 1e-6
MAX_REFLECTION_K = 64

Vector = Tuple[float, float]


def _pair(values: Sequence[float], name: str) -> Vector:
    if len(values) != 2:
        raise DomainError(f"{name} must have two components, got {list(values)}")
    a, b = float(values[0]), float(values[1])
    if not (math.isfinite(a) and math.isfinite(b)):
        raise DomainError(f"{name} must be finite, got {list(values)}")
    return (a, b)


@dataclass(frozen=True)
class ModelParams:
    """
    Raw two-firm inputs: X_i(t) = x0_i + mu_i t + sigma_i W_i(t), corr(W1, W2) = rho.

    Attributes:
        mu: Drift of each log-distance to default, per year.
        sigma1: Volatility of firm 1, per sqrt(year).
        sigma2: Volatility of firm 2, per sqrt(year).
        rho: Correlation of the two asset processes.
        x0: Initial log-distances ln(V_i(0) / B_i).
    """
    mu: Vector
    sigma1: float
    sigma2: float
    rho: float
    x0: Vector

    def __post_init__(self) -> None:
        object.__setattr__(self, "mu", _pair(self.mu, "mu"))
        object.__setattr__(self, "x0", _pair(self.x0, "x0"))
        if not (self.sigma1 > 0.0 and self.sigma2 > 0.0):
            raise DomainError(f"volatilities must be positive, got {self.sigma1}, {self.sigma2}")
        if not math.isfinite(self.rho) or abs(self.rho) >= RHO_CAP:
            raise SingularCovarianceError(
                f"|rho| must be below {RHO_CAP} for an invertible covariance factor, got {self.rho}"
            )
        if self.x0[0] <= 0.0 or self.x0[1] <= 0.0:
            raise DomainError(f"x0 components must be positive (firm already in default), got {self.x0}")

    @property
    def sigma(self) -> Vector:
        return (self.sigma1, self.sigma2)

    def swapped(self) -> "ModelParams":
        """The same model with the roles of the two firms exchanged."""
        return ModelParams(
            mu=(self.mu[1], self.mu[0]),
            sigma1=self.sigma2,
            sigma2=self.sigma1,
            rho=self.rho,
            x0=(self.x0[1], self.x0[0]),
        )

    def with_rho(self, rho: float) -> "ModelParams":
        return ModelParams(mu=self.mu, sigma1=self.sigma1, sigma2=self.sigma2, rho=rho, x0=self.x0)

    def to_z(self, x: Sequence[float]) -> np.ndarray:
        """Map X-coordinates to Z = Sigma^-1 X."""
        return sigma_inverse(self) @ np.asarray(x, dtype=float)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mu": list(self.mu),
            "sigma": [self.sigma1, self.sigma2],
            "rho": self.rho,
            "x0": list(self.x0),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ModelParams":
        sigma = _pair(data["sigma"], "sigma")
        return cls(mu=data["mu"], sigma1=sigma[0], sigma2=sigma[1], rho=float(data["rho"]), x0=data["x0"])


@dataclass(frozen=True)
class WedgeState:
    """
    Transformed coordinates in which all densities live.

    Construction is not validated so that boundary starts can be represented;
    build_model and tilde_model enforce 0 < theta < alpha.
    """
    z: Vector
    r: float
    theta: float
    alpha: float
    m: Vector

    @classmethod
    def from_polar(cls, r: float, theta: float, alpha: float, m: Sequence[float] = (0.0, 0.0)) -> "WedgeState":
        z = (r * math.cos(theta), r * math.sin(theta))
        return cls(z=z, r=float(r), theta=float(theta), alpha=float(alpha), m=_pair(m, "m"))

    @classmethod
    def from_z(cls, z: Sequence[float], alpha: float, m: Sequence[float] = (0.0, 0.0)) -> "WedgeState":
        z1, z2 = _pair(z, "z")
        return cls(z=(z1, z2), r=math.hypot(z1, z2), theta=math.atan2(z2, z1), alpha=float(alpha), m=_pair(m, "m"))

    @property
    def m_norm2(self) -> float:
        return self.m[0] ** 2 + self.m[1] ** 2

    @property
    def edge_normal(self) -> Vector:
        """Inward unit normal of the theta = alpha edge."""
        return (math.sin(self.alpha), -math.cos(self.alpha))

    @property
    def edge_distances(self) -> Vector:
        """Distances of z to the theta = alpha edge and to the theta = 0 edge."""
        n1, n2 = self.edge_normal
        return (n1 * self.z[0] + n2 * self.z[1], self.z[1])

    @property
    def reflection_k(self) -> Optional[int]:
        """k with alpha = pi / k, if any."""
        k = int(round(math.pi / self.alpha))
        if 2 <= k <= MAX_REFLECTION_K and abs(self.alpha - math.pi / k) < 1e-12:
            return k
        return None

    def tilde(self) -> "WedgeState":
        """
        The same state seen through the reflection across the wedge bisector.

        The theta = 0 and theta = alpha edges swap, so the default of firm 1 becomes
        the theta = 0 edge.
        """
        reflect = tilde_reflection(self.alpha)
        z = reflect @ np.asarray(self.z)
        m = reflect @ np.asarray(self.m)
        return WedgeState(
            z=(float(z[0]), float(z[1])),
            r=self.r,
            theta=self.alpha - self.theta,
            alpha=self.alpha,
            m=(float(m[0]), float(m[1])),
        )

    def log_tilt(self, points: np.ndarray, t: float) -> np.ndarray:
        """Girsanov exponent m.(z - z0) - |m|^2 t / 2 at the given end points."""
        pts = np.asarray(points, dtype=float)
        return (
            self.m[0] * (pts[..., 0] - self.z[0])
            + self.m[1] * (pts[..., 1] - self.z[1])
            - 0.5 * self.m_norm2 * t
        )

    def to_dict(self) -> Dict[str, Any]:
        return {"z": list(self.z), "r": self.r, "theta": self.theta, "alpha": self.alpha, "m": list(self.m)}


@dataclass(frozen=True, eq=False)
class ReflectionSet:
    """The 2k images S_0 .. S_{2k-1} of the wedge of angle pi / k."""
    k: int
    matrices: Tuple[np.ndarray, ...] = field(repr=False)

    @property
    def alpha(self) -> float:
        return math.pi / self.k

    @property
    def signs(self) -> np.ndarray:
        """(-1)^j, the determinant of each S_j."""
        return np.array([(-1.0) ** j for j in range(2 * self.k)])

    def stacked(self) -> np.ndarray:
        return np.stack(self.matrices)


def wedge_angle(rho: float) -> float:
    """
    Opening angle alpha = arccos(-rho) of the wedge.

    Raises:
        SingularCovarianceError: |rho| at or beyond the cap.
    """
    if not math.isfinite(rho) or abs(rho) >= RHO_CAP:
        raise SingularCovarianceError(f"wedge_angle: |rho| must be below {RHO_CAP}, got {rho}")
    return math.acos(-rho)


def wedge_angle_branches(rho: float) -> float:
    """Three-branch arctangent form of the wedge angle."""
    if rho > 0.0:
        return math.pi + math.atan(-math.sqrt(1.0 - rho * rho) / rho)
    if rho == 0.0:
        return 0.5 * math.pi
    return math.atan(-math.sqrt(1.0 - rho * rho) / rho)


def sigma_matrix(p: ModelParams) -> np.ndarray:
    """Sigma = [[s1 sqrt(1 - rho^2), s1 rho], [0, s2]], so that X = Sigma W."""
    c = math.sqrt(1.0 - p.rho * p.rho)
    return np.array([[p.sigma1 * c, p.sigma1 * p.rho], [0.0, p.sigma2]])


def sigma_inverse(p: ModelParams) -> np.ndarray:
    c = math.sqrt(1.0 - p.rho * p.rho)
    return np.array([
        [1.0 / (p.sigma1 * c), -p.rho / (p.sigma2 * c)],
        [0.0, 1.0 / p.sigma2],
    ])


def tilde_matrix(rho: float) -> np.ndarray:
    """T = [[-rho, sqrt(1 - rho^2)], [sqrt(1 - rho^2), rho]]; orthogonal and involutive."""
    c = math.sqrt(1.0 - rho * rho)
    return np.array([[-rho, c], [c, rho]])


def tilde_reflection(alpha: float) -> np.ndarray:
    """Reflection across the bisector of the wedge of angle alpha."""
    return np.array([[math.cos(alpha), math.sin(alpha)], [math.sin(alpha), -math.cos(alpha)]])


def _checked_state(z: np.ndarray, alpha: float, m: np.ndarray, label: str) -> WedgeState:
    state = WedgeState.from_z(z, alpha, m)
    if not (state.r > 0.0 and 0.0 < state.theta < alpha):
        raise InvalidStateError(
            f"{label}: theta={state.theta:.17g} outside (0, alpha={alpha:.17g}) for z={state.z}"
        )
    return state


def build_model(p: ModelParams) -> WedgeState:
    """
    Transform raw model inputs into the wedge frame.

    Args:
        p: Model parameters.

    Returns:
        WedgeState with z = Sigma^-1 x0, m = Sigma^-1 mu and alpha = arccos(-rho).

    Raises:
        SingularCovarianceError: |rho| at or beyond the cap.
        InvalidStateError: theta not strictly inside (0, alpha).
    """
    alpha = wedge_angle(p.rho)
    inverse = sigma_inverse(p)
    z = inverse @ np.asarray(p.x0)
    m = inverse @ np.asarray(p.mu)
    return _checked_state(z, alpha, m, "build_model")


def state_at(p: ModelParams, x: Sequence[float]) -> WedgeState:
    """Wedge state of the model restarted from the observed X-values x."""
    alpha = wedge_angle(p.rho)
    inverse = sigma_inverse(p)
    return _checked_state(inverse @ np.asarray(x, dtype=float), alpha, inverse @ np.asarray(p.mu), "state_at")


def tilde_model(p: ModelParams) -> WedgeState:
    """
    Wedge state of Z~ = T~ Sigma^-1 X, in which firm 1 defaults on the theta = 0 edge.

    Raises:
        As build_model.
    """
    alpha = wedge_angle(p.rho)
    transform = tilde_matrix(p.rho) @ sigma_inverse(p)
    z = transform @ np.asarray(p.x0)
    m = transform @ np.asarray(p.mu)
    return _checked_state(z, alpha, m, "tilde_model")


def reflection_set(k: int) -> ReflectionSet:
    """
    Reflection images of the wedge of angle pi / k.

    T_j reflects across the line at angle j pi / k; S_0 = I and S_j = T_j S_{j-1}.

    Raises:
        DomainError: k < 2.
    """
    if int(k) != k or k < 2:
        raise DomainError(f"reflection_set: k must be an integer >= 2, got {k}")
    k = int(k)
    alpha_k = math.pi / k
    matrices = [np.eye(2)]
    for j in range(1, 2 * k):
        angle = 2.0 * j * alpha_k
        t_j = np.array([[math.cos(angle), math.sin(angle)], [math.sin(angle), -math.cos(angle)]])
        matrices.append(t_j @ matrices[-1])
    return ReflectionSet(k=k, matrices=tuple(matrices))


def special_case_k(rho: float, tol: float = 1e-9) -> Optional[int]:
    """
    Integer k in [2, 64] with rho = -cos(pi / k) to within tol, or None.
    """
    for k in range(2, MAX_REFLECTION_K + 1):
        if abs(rho + math.cos(math.pi / k)) < tol:
            return k
    return None


def rho_k(k: int) -> float:
    """Correlation -cos(pi / k) whose wedge admits the reflection closed forms."""
    return -math.cos(math.pi / k)

"""Physical parameters, derived cavity-induced rates and regime checks.

All frequencies are angular (rad/s) and hbar = 1.  Physical constants only
enter the conversion between mean photon number and cavity temperature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import scipy.constants as sc

from .errors import DomainError

# CODATA values (exact in the 2019 SI).
HBAR = sc.hbar
K_B = sc.k
TWO_PI = 2.0 * math.pi

# "much greater than" is read as a factor of ten.
MUCH_GREATER = 10.0


def thermal_occupation(omega_c, temperature):
    """Mean thermal photon number of a mode at angular frequency ``omega_c``."""
    if omega_c <= 0:
        raise DomainError(f"omega_c must be positive, got {omega_c!r}")
    if temperature < 0:
        raise DomainError(f"temperature must be non-negative, got {temperature!r}")
    if temperature == 0:
        return 0.0
    x = HBAR * omega_c / (K_B * temperature)
    return 1.0 / math.expm1(x)


def cavity_temperature(omega_c, nbar):
    """Bath temperature (K) at which the mode has mean occupation ``nbar``.

    ``nbar = 0`` corresponds to zero temperature, which has no finite inverse
    on the log scale, and is rejected.
    """
    if omega_c <= 0:
        raise DomainError(f"omega_c must be positive, got {omega_c!r}")
    if nbar == 0:
        raise DomainError("nbar = 0 is the zero-temperature limit; no finite inverse")
    if nbar < 0:
        raise DomainError(f"nbar must be positive, got {nbar!r}")
    return HBAR * omega_c / (K_B * math.log1p(1.0 / nbar))


def _is_half_integer(x):
    return float(2 * x).is_integer()


@dataclass(frozen=True)
class PhysicalParams:
    """Experimental inputs, angular frequencies in rad/s.

    ``j_subspace`` defaults to the Dicke value ``n_spins / 2``.
    """

    omega_c: float
    omega_s: float
    rabi: float
    g: float
    kappa: float
    nbar: float = 0.0
    n_spins: int = 1
    j_subspace: float | None = field(default=None)

    def __post_init__(self):
        for name in ("omega_c", "omega_s", "rabi", "g", "kappa"):
            value = getattr(self, name)
            if not value > 0:
                raise DomainError(f"{name} must be strictly positive, got {value!r}")
        if self.nbar < 0:
            raise DomainError(f"nbar must be non-negative, got {self.nbar!r}")
        if int(self.n_spins) != self.n_spins or self.n_spins < 1:
            raise DomainError(f"n_spins must be a positive integer, got {self.n_spins!r}")
        object.__setattr__(self, "n_spins", int(self.n_spins))
        if self.j_subspace is None:
            object.__setattr__(self, "j_subspace", self.n_spins / 2)
        j = self.j_subspace
        if j < 0 or not _is_half_integer(j):
            raise DomainError(f"j_subspace must be a non-negative half-integer, got {j!r}")
        if j > self.n_spins / 2:
            raise DomainError(f"j_subspace={j} exceeds n_spins/2={self.n_spins / 2}")
        # Parity of 2J must match the parity of N_s.
        if (int(round(2 * j)) - self.n_spins) % 2:
            raise DomainError(f"j_subspace={j} is not reachable with n_spins={self.n_spins}")

    @classmethod
    def from_linear(cls, omega_c_hz, omega_s_hz, rabi_hz, g_hz, kappa_hz, *,
                    nbar=None, temperature=None, n_spins=1, j_subspace=None):
        """Build from linear frequencies in Hz (the ``omega / 2 pi`` values).

        Give either ``nbar`` or a cavity ``temperature`` in kelvin, not both.
        """
        if nbar is not None and temperature is not None:
            raise DomainError("give either nbar or temperature, not both")
        omega_c = TWO_PI * omega_c_hz
        if temperature is not None:
            nbar = thermal_occupation(omega_c, temperature)
        return cls(
            omega_c=omega_c,
            omega_s=TWO_PI * omega_s_hz,
            rabi=TWO_PI * rabi_hz,
            g=TWO_PI * g_hz,
            kappa=TWO_PI * kappa_hz,
            nbar=0.0 if nbar is None else float(nbar),
            n_spins=n_spins,
            j_subspace=j_subspace,
        )

    def with_(self, **changes):
        if "n_spins" in changes and "j_subspace" not in changes:
            changes["j_subspace"] = None
        return replace(self, **changes)


def esr_example(n_spins=10**11, nbar=0.0):
    """X-band ESR parameter set with the drive matched to the detuning."""
    return PhysicalParams.from_linear(
        omega_c_hz=10e9,
        omega_s_hz=10e9 - 100e6,
        rabi_hz=100e6,
        g_hz=1.0,
        kappa_hz=1e6,
        nbar=nbar,
        n_spins=n_spins,
    )


def lorentzian_rate(g, kappa, detuning):
    """g^2 kappa / (kappa^2 + 4 detuning^2)."""
    return g * g * kappa / (kappa * kappa + 4.0 * detuning * detuning)


def lorentzian_shift(g, kappa, detuning):
    """g^2 detuning / (kappa^2 + 4 detuning^2)."""
    return g * g * detuning / (kappa * kappa + 4.0 * detuning * detuning)


@dataclass(frozen=True)
class DerivedRates:
    delta: float
    Delta_minus: float
    Delta_plus: float
    gamma_s: float
    omega_eff: float
    gamma_0: float
    gamma_minus: float
    gamma_plus: float
    omega_0: float
    omega_minus: float
    omega_plus: float

    @property
    def plus_over_minus(self):
        return self.gamma_plus / self.gamma_minus

    @property
    def zero_over_minus(self):
        return self.gamma_0 / self.gamma_minus


def derived_rates(params: PhysicalParams) -> DerivedRates:
    """Closed-form rates for the three frequency components of the coupling.

    The sideband at ``delta - rabi`` produces the cooling dissipator; its rate
    is the effective spin dissipation rate ``gamma_s`` and the matching
    effective Hamiltonian frequency is ``omega_eff = -omega_minus``.
    """
    g, kappa = params.g, params.kappa
    delta = params.omega_c - params.omega_s
    dm = delta - params.rabi
    dp = delta + params.rabi
    gamma_minus = lorentzian_rate(g, kappa, dm)
    return DerivedRates(
        delta=delta,
        Delta_minus=dm,
        Delta_plus=dp,
        gamma_s=gamma_minus,
        omega_eff=-lorentzian_shift(g, kappa, dm),
        gamma_0=4.0 * lorentzian_rate(g, kappa, delta),
        gamma_minus=gamma_minus,
        gamma_plus=lorentzian_rate(g, kappa, dp),
        omega_0=4.0 * lorentzian_shift(g, kappa, delta),
        omega_minus=lorentzian_shift(g, kappa, dm),
        omega_plus=lorentzian_shift(g, kappa, dp),
    )


@dataclass(frozen=True)
class Check:
    """One inequality; ``ok`` iff ``margin >= 1``."""

    name: str
    ratio: float
    required: float

    @property
    def margin(self):
        return self.ratio / self.required

    @property
    def ok(self):
        # Boundary cases such as kappa == 10 g sqrt(N) must survive rounding.
        return self.margin >= 1.0 - 1e-12


@dataclass(frozen=True)
class RegimeReport:
    rwa1: tuple[Check, ...]
    rwa2: tuple[Check, ...]
    markov: Check
    spin_number_bound: float
    spin_number: Check
    plus_over_minus: float
    zero_over_minus: float

    @property
    def rwa1_ok(self):
        return all(c.ok for c in self.rwa1)

    @property
    def rwa2_ok(self):
        return all(c.ok for c in self.rwa2)

    @property
    def markov_ok(self):
        return self.markov.ok

    @property
    def dominance_ok(self):
        return self.plus_over_minus < 1.0 and self.zero_over_minus < 1.0

    def checks(self):
        return (*self.rwa1, *self.rwa2, self.markov, self.spin_number)

    def as_dict(self):
        return {
            "rwa1_ok": self.rwa1_ok,
            "rwa2_ok": self.rwa2_ok,
            "markov_ok": self.markov_ok,
            "dominance_ok": self.dominance_ok,
            "spin_number_bound": self.spin_number_bound,
            "gamma_plus/gamma_minus": self.plus_over_minus,
            "gamma_0/gamma_minus": self.zero_over_minus,
            "checks": {
                c.name: {"ratio": c.ratio, "required": c.required,
                         "margin": c.margin, "ok": c.ok}
                for c in self.checks()
            },
        }


def check_regime(params: PhysicalParams) -> RegimeReport:
    """Evaluate the approximation chain g sqrt(N) << kappa << rabi, delta << omega.

    The Markov check is the strict ``kappa >= 10 g sqrt(N_s)`` criterion.
    ``spin_number`` is the looser bound ``N_s << kappa^2 / g^2`` read with the
    same factor of ten.
    """
    rates = derived_rates(params)
    w = min(params.omega_c, params.omega_s)
    big = MUCH_GREATER
    rwa1 = (
        Check("omega/kappa", w / params.kappa, big),
        Check("omega/rabi", w / params.rabi, big),
        Check("omega/g", w / params.g, big),
    )
    rwa2 = (
        Check("rabi/kappa", params.rabi / params.kappa, big),
        Check("delta/kappa", abs(rates.delta) / params.kappa, big),
    )
    markov = Check("kappa/(g sqrt(N_s))",
                   params.kappa / (params.g * math.sqrt(params.n_spins)), 10.0)
    bound = (params.kappa / params.g) ** 2
    return RegimeReport(
        rwa1=rwa1,
        rwa2=rwa2,
        markov=markov,
        spin_number_bound=bound,
        spin_number=Check("(kappa/g)^2/N_s", bound / params.n_spins, big),
        plus_over_minus=rates.plus_over_minus,
        zero_over_minus=rates.zero_over_minus,
    )

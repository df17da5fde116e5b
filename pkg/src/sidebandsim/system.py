"""Physical parameter records and the complex susceptibilities built on them.

All rates and frequencies are angular (rad/s).  Detunings are defined as
laser frequency minus cavity resonance, so red-detuned operation has a
negative detuning.  hbar = 1 throughout; occupancies are quanta.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SQRT3 = np.sqrt(3.0)


@dataclass(frozen=True)
class OpticalMode:
    """One driven cavity resonance.

    Parameters
    ----------
    kappa : float
        Total linewidth (rad/s), > 0.
    detuning : float
        Drive detuning from resonance (rad/s); negative = red-detuned.
    port_couplings : tuple of float
        External coupling rates (rad/s).  Port index 0 is the designated
        detection / transmission port; remaining entries lump other output
        channels.  Their sum may not exceed ``kappa``; any deficit is an
        internal loss channel (an undetected vacuum port).
    g : float
        Cavity-enhanced (drive-boosted) optomechanical coupling rate (rad/s).
    label : str
        Free text, e.g. "cooling 862 nm".
    """

    kappa: float
    detuning: float
    port_couplings: tuple = (0.0,)
    g: float = 0.0
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "port_couplings", tuple(float(k) for k in self.port_couplings))
        if not self.kappa > 0:
            raise ValueError(f"kappa must be > 0, got {self.kappa}")
        if not self.port_couplings:
            raise ValueError("at least one port coupling is required")
        for i, k in enumerate(self.port_couplings):
            if k < 0:
                raise ValueError(f"port coupling {i} must be >= 0, got {k}")
        if sum(self.port_couplings) > self.kappa * (1 + 1e-12):
            raise ValueError(
                f"sum of port couplings {sum(self.port_couplings):.6g} exceeds kappa {self.kappa:.6g}")
        if self.g < 0:
            raise ValueError(f"g must be >= 0, got {self.g}")

    @property
    def kappa_1(self):
        """Coupling rate of the detection port."""
        return self.port_couplings[0]

    @property
    def kappa_loss(self):
        """Undeclared internal loss rate (kappa minus the declared ports)."""
        return max(self.kappa - sum(self.port_couplings), 0.0)

    def effective_ports(self):
        """Declared ports plus the internal loss remainder, if any.

        Every loss channel admits vacuum, so input-output models must sum
        over this full list for the noise budget to be unitary.
        """
        ports = list(self.port_couplings)
        if self.kappa_loss > 1e-12 * self.kappa:
            ports.append(self.kappa_loss)
        return tuple(ports)


@dataclass(frozen=True)
class MechanicalMode:
    """A mechanical oscillator: resonance, intrinsic damping, bath occupancy."""

    omega_m: float
    gamma: float
    n_th: float = 0.0
    soft_clamped: bool = False

    def __post_init__(self):
        if not self.omega_m > 0:
            raise ValueError(f"omega_m must be > 0, got {self.omega_m}")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")
        if self.n_th < 0:
            raise ValueError(f"n_th must be >= 0, got {self.n_th}")
        if not np.isfinite(self.omega_m / self.gamma):
            raise ValueError("quality factor omega_m/gamma must be finite")

    @property
    def quality_factor(self):
        return self.omega_m / self.gamma


def magic_detuning(kappa, sign=-1):
    """Detuning at which the quadratic transduction coefficient
    3*Delta^2 - (kappa/2)^2 vanishes in the fast-cavity limit."""
    if not kappa > 0:
        raise ValueError("kappa must be > 0")
    if sign not in (+1, -1):
        raise ValueError("sign must be +1 or -1")
    return sign * kappa / (2.0 * SQRT3)


def cavity_susceptibility(omega, mode: OpticalMode):
    """chi(w) = 1 / (kappa/2 - i (Delta + w)); vectorized over omega."""
    omega = np.asarray(omega, dtype=float)
    return 1.0 / (mode.kappa / 2.0 - 1j * (mode.detuning + omega))


def cavity_susceptibility_conj_neg(omega, mode: OpticalMode):
    """conj(chi(-w)) written out directly: 1 / (kappa/2 + i (Delta - w)).

    Evaluating the mirrored-and-conjugated response this way keeps the
    reflection identity exact at the bit level.
    """
    omega = np.asarray(omega, dtype=float)
    return 1.0 / (mode.kappa / 2.0 + 1j * (mode.detuning - omega))


def mechanical_susceptibility(omega, mode: MechanicalMode):
    """chi_m(w) = Omega_m / (Omega_m^2 - w^2 - i w Gamma)."""
    omega = np.asarray(omega, dtype=float)
    return mode.omega_m / (mode.omega_m ** 2 - omega ** 2 - 1j * omega * mode.gamma)


def backaction_self_energy(omega, cooling: OpticalMode, probe: OpticalMode | None = None):
    """Radiation-pressure self-energy added to the inverse mechanical
    susceptibility by the driven cavity mode(s).

    Sigma(w) = 2i g^2 (conj(chi(-w)) - chi(w)), summed over beams.
    """
    omega = np.asarray(omega, dtype=float)
    sigma = 2j * cooling.g ** 2 * (cavity_susceptibility_conj_neg(omega, cooling)
                                   - cavity_susceptibility(omega, cooling))
    if probe is not None and probe.g != 0.0:
        sigma = sigma + 2j * probe.g ** 2 * (cavity_susceptibility_conj_neg(omega, probe)
                                             - cavity_susceptibility(omega, probe))
    return sigma


def modified_mechanical_susceptibility(omega, mode: MechanicalMode,
                                       cooling: OpticalMode,
                                       probe: OpticalMode | None = None):
    """Dressed mechanical susceptibility including dynamical backaction of the
    cooling beam and (optionally) the probe beam.

    With both couplings zero this reduces to the bare susceptibility.
    """
    inv = 1.0 / mechanical_susceptibility(omega, mode)
    return 1.0 / (inv + backaction_self_energy(omega, cooling, probe))


def backaction_damping_and_shift(omega, mode: MechanicalMode,
                                 cooling: OpticalMode,
                                 probe: OpticalMode | None = None):
    """Frequency-resolved optomechanical damping and spring shift.

    Writes the dressed susceptibility as
    ``Omega_m / (Omega_m^2 + 2 w dOmega(w) - w^2 - i w (Gamma + Gamma_opt(w)))``
    and returns ``(Gamma_opt(w), dOmega(w))``.  At w = Omega_m the damping
    equals the anti-Stokes minus Stokes scattering rate difference.
    """
    omega = np.asarray(omega, dtype=float)
    sigma = backaction_self_energy(omega, cooling, probe)
    # avoid 0/0 at w = 0; both rates have a finite w -> 0 limit of zero
    # damping and pure real shift, which this evaluation point never needs
    safe = np.where(omega == 0.0, 1.0, omega)
    gamma_opt = -mode.omega_m * np.imag(sigma) / safe
    domega = mode.omega_m * np.real(sigma) / (2.0 * safe)
    gamma_opt = np.where(omega == 0.0, 0.0, gamma_opt)
    domega = np.where(omega == 0.0, 0.0, domega)
    if np.ndim(omega) == 0:
        return float(gamma_opt), float(domega)
    return gamma_opt, domega

# pylint: disable=too-few-public-methods
class RateColumns:
    """
    CSV columns of a rate sweep
    All rates in Purcell units
    """
    omega = "omega_eV"
    gamma_down_aa = "gamma_down_aa"
    gamma_up_aa = "gamma_up_aa"
    gamma_down_ab = "gamma_down_ab"
    gamma_up_ab = "gamma_up_ab"
    delta_down_ab = "delta_down_ab"
    delta_up_ab = "delta_up_ab"

    rates = [gamma_down_aa, gamma_up_aa, gamma_down_ab,
             gamma_up_ab, delta_down_ab, delta_up_ab]
    all = [omega] + rates


class TrajectoryColumns:
    """
    CSV columns of a trajectory
    Time in units of 1/Gamma(0) unless the raw time unit is requested
    """
    time = "t"
    rho_aa = "rho_aa"
    rho_bb = "rho_bb"
    rho_pp = "rhoPP"
    rho_mm = "rhoMM"
    rho_tt = "rhoTT"
    rho23_re = "Re(rho23)"
    rho23_im = "Im(rho23)"
    negativity = "log_negativity"

    @staticmethod
    def population(k):
        return f"pop_{k}"


class SteadyColumns:
    """ CSV columns of the steady-state bar data """
    alpha_g = "alpha_g"
    gamma_pump = "gamma_pump"
    cross_pump = "include_cross_pump"
    rho_gg = "rhoGG"
    rho_pp = "rhoPP"
    rho_mm = "rhoMM"
    rho_tt = "rhoTT"
    rho11 = "rho11"
    rho22 = "rho22"
    rho33 = "rho33"
    rho44 = "rho44"
    rho23_re = "Re(rho23)"
    rho23_im = "Im(rho23)"
    rho_aa = "rho_aa"
    rho_bb = "rho_bb"
    plateau_aa = "plateau_rho_aa"
    plateau_bb = "plateau_rho_bb"
    gamma_ref = "gamma0_purcell"


class SpectrumColumns:
    """ CSV columns of a spectrum and of its peaks sidecar """
    detuning = "delta_omega_over_Gamma0"
    total = "S_total"
    self_term = "S_aa"
    cross_term = "S_ab_cross"

    position = "position"
    height = "height"
    fwhm = "fwhm"


class CompareColumns:
    """ CSV columns of a rate-table comparison report """
    column = "column"
    max_rel_deviation = "max_rel_deviation"
    flagged = "flagged"

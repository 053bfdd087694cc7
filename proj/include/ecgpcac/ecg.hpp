#pragma once

/**
 * @file ecg.hpp
 * @brief Extremum-seeking command generator.
 *
 * Highpass -> demodulation -> lowpass -> integrator, with a sinusoidal dither
 * added to the integrator output. Optional dither/gain modulation laws act
 * after a switching step.
 */

#include <algorithm>
#include <cmath>
#include <limits>
#include <string_view>

#include "ecgpcac/errors.hpp"

namespace ecgpcac {

struct EcgParams {
    double omega_h = 0.1;  ///< highpass cutoff, rad/s (omega_h * T_s is the per-step coefficient)
    double omega_l = 1.0;  ///< lowpass cutoff, rad/s
    double omega_es = 1.0; ///< dither frequency, rad/s
    double a_es = 0.1;     ///< modulation dither amplitude
    double b_es = 0.25;    ///< demodulation dither amplitude
    double K_es = 0.1;     ///< gradient gain, positive to maximize J
    double T_s = 0.01;

    /// Drops the omega_l T_s factor in the demodulator (block-diagram variant).
    bool figure_form = false;
    /// Demodulate with the current (modulated) amplitude instead of the nominal one.
    bool demod_tracks_amplitude = false;

    void validate() const {
        const double h = omega_h * T_s;
        const double l = omega_l * T_s;
        if (!(T_s > 0.0) || !std::isfinite(T_s))
            throw ContractViolation("EcgParams: T_s must be positive");
        if (!(h > 0.0 && h < 1.0))
            throw ContractViolation("EcgParams: omega_h * T_s must lie in (0, 1)");
        if (!(l > 0.0 && l < 1.0))
            throw ContractViolation("EcgParams: omega_l * T_s must lie in (0, 1)");
        if (!(a_es > 0.0) || !(b_es > 0.0))
            throw ContractViolation("EcgParams: a_es and b_es must be positive");
        if (!std::isfinite(omega_es) || !std::isfinite(K_es))
            throw ContractViolation("EcgParams: omega_es and K_es must be finite");
    }
};

enum class ModulationKind { none, threshold_decay, smooth_attenuation, zero_dither };

struct ModulationScheme {
    ModulationKind kind = ModulationKind::none;
    double k_switch = 0.0; ///< modulation acts on steps k > k_switch
    double a_min = 0.0;
    // threshold_decay
    double alpha = 0.999;
    double beta = 0.0;
    // smooth_attenuation
    double K_min = 0.0;
    double gamma_a = 0.0;
    double gamma_K = 0.0;
    double y_l_ref = 1.0;

    void validate() const {
        if (!(k_switch >= 0.0))
            throw ContractViolation("ModulationScheme: k_switch must be non-negative");
        switch (kind) {
        case ModulationKind::none:
        case ModulationKind::zero_dither:
            return;
        case ModulationKind::threshold_decay:
            if (!(a_min > 0.0) || !(alpha > 0.0 && alpha < 1.0) || !(beta >= 0.0))
                throw ContractViolation("ModulationScheme: threshold decay needs a_min > 0, alpha in (0,1), beta >= 0");
            return;
        case ModulationKind::smooth_attenuation:
            if (!(a_min > 0.0) || !(K_min >= 0.0) || !(gamma_a > 0.0 && gamma_a < 1.0) ||
                !(gamma_K > 0.0 && gamma_K < 1.0) || !(y_l_ref > 0.0))
                throw ContractViolation(
                    "ModulationScheme: smooth attenuation needs a_min > 0, gammas in (0,1), y_l_ref > 0");
            return;
        }
    }
};

enum class GainKind { constant, normalized };

struct GainLaw {
    GainKind kind = GainKind::constant;
    double eps_norm = 1e-6;
    bool product_form = false; ///< K0 / (eps |y_l|) instead of K0 / (eps + |y_l|)

    void validate() const {
        if (!(eps_norm > 0.0))
            throw ContractViolation("GainLaw: eps_norm must be positive");
    }
};

struct EcgState {
    double y_h = 0.0;
    double y_d = 0.0;
    double y_l = 0.0;
    double y_es = 0.0;
    double J_prev = 0.0;
    bool primed = false;
    long long k = 0;
    double a_cur = 0.0;
    double K_cur = 0.0;
    double K_nominal = 0.0; ///< K_0 of the gain law; attenuated by smooth modulation
    double r = 0.0;

    static EcgState initial(const EcgParams& prm) {
        EcgState s;
        s.a_cur = prm.a_es;
        s.K_cur = prm.K_es;
        s.K_nominal = prm.K_es;
        return s;
    }
};

/// K from y_l. The constant law returns K0 unchanged.
inline double gain_law(double y_l, double K0, const GainLaw& law) {
    if (law.kind == GainKind::constant)
        return K0;
    const double mag = std::abs(y_l);
    if (law.product_form)
        return K0 / (law.eps_norm * std::max(mag, std::numeric_limits<double>::min()));
    return K0 / (law.eps_norm + mag);
}

inline double dither_phase(const EcgState& s, const EcgParams& prm) {
    return double(s.k) * prm.omega_es * prm.T_s;
}

/// One pass of the filter chain on the cost sample J_k. Returns r_k.
inline double ecg_step(EcgState& s, const EcgParams& prm, const GainLaw& law, double J) {
    if (!std::isfinite(J))
        throw ContractViolation("ecg_step: cost sample must be finite");
    if (!s.primed) {
        s.J_prev = J;
        s.primed = true;
    }
    const double sn = std::sin(dither_phase(s, prm));
    const double wh = prm.omega_h * prm.T_s;
    const double wl = prm.omega_l * prm.T_s;
    const double a_demod = prm.demod_tracks_amplitude ? s.a_cur : prm.a_es;

    s.y_h = (1.0 - wh) * s.y_h + J - s.J_prev;
    s.y_d = a_demod > 0.0 ? (2.0 * prm.b_es / a_demod) * (prm.figure_form ? 1.0 : wl) * sn * s.y_h : 0.0;
    s.y_l = (1.0 - wl) * s.y_l + wl * s.y_d;
    s.K_cur = gain_law(s.y_l, s.K_nominal, law);
    s.y_es += s.K_cur * s.y_l;
    s.r = s.y_es + s.a_cur * sn;

    s.J_prev = J;
    ++s.k;
    return s.r;
}

/// Updates a_cur (and the nominal gain) for the step just processed, i.e. k - 1.
inline void modulate_amplitude(EcgState& s, const ModulationScheme& scheme, const GainLaw& law) {
    if (scheme.kind == ModulationKind::none)
        return;
    if (!(double(s.k - 1) > scheme.k_switch))
        return;
    switch (scheme.kind) {
    case ModulationKind::none:
        return;
    case ModulationKind::zero_dither:
        s.a_cur = 0.0;
        return;
    case ModulationKind::threshold_decay:
        if (std::abs(s.y_l) < scheme.beta)
            s.a_cur = std::max(scheme.a_min, scheme.alpha * s.a_cur);
        return;
    case ModulationKind::smooth_attenuation: {
        const double q = s.y_l / scheme.y_l_ref;
        const double bump = std::exp(-q * q);
        s.a_cur = std::max(scheme.a_min, (1.0 - scheme.gamma_a * bump) * s.a_cur);
        s.K_nominal = std::max(scheme.K_min, (1.0 - scheme.gamma_K * bump) * s.K_nominal);
        if (law.kind == GainKind::constant)
            s.K_cur = s.K_nominal;
        return;
    }
    }
}

/// Bundles parameters, laws and state for use inside a loop.
class CommandGenerator {
public:
    CommandGenerator(const EcgParams& prm, const ModulationScheme& scheme, const GainLaw& law)
        : prm_(prm), scheme_(scheme), law_(law), state_(EcgState::initial(prm)) {
        prm_.validate();
        scheme_.validate();
        law_.validate();
    }

    double step(double J) {
        const double r = ecg_step(state_, prm_, law_, J);
        modulate_amplitude(state_, scheme_, law_);
        return r;
    }

    const EcgState& state() const { return state_; }
    const EcgParams& params() const { return prm_; }

private:
    EcgParams prm_;
    ModulationScheme scheme_;
    GainLaw law_;
    EcgState state_;
};

inline std::string_view to_string(ModulationKind k) {
    switch (k) {
    case ModulationKind::none:
        return "none";
    case ModulationKind::threshold_decay:
        return "threshold_decay";
    case ModulationKind::smooth_attenuation:
        return "smooth_attenuation";
    case ModulationKind::zero_dither:
        return "zero_dither";
    }
    return "?";
}

inline std::string_view to_string(GainKind k) { return k == GainKind::constant ? "constant" : "normalized"; }

} // namespace ecgpcac

#include "hifd/wavesim.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <random>

#include "hifd/errors.hpp"

namespace hifd::wavesim {
namespace {

constexpr double kPi = std::numbers::pi;

void require(bool ok, const char* what) {
    if (!ok) throw ParameterError(what);
}

/// First sample index whose timestamp is >= t (tolerant of grid-aligned t).
std::size_t grid_index(double t, double fs, std::size_t n) {
    if (t <= 0.0) return 0;
    auto idx = static_cast<long long>(std::ceil(t * fs - 1e-6));
    idx = std::max(idx, 0ll);
    return std::min(static_cast<std::size_t>(idx), n);
}

double arc_rate(double g, double abs_i, const HifParams& p) {
    return (abs_i / (p.u0 + p.r0 * abs_i) - g) / p.tau;
}

/// One RK4 step of the conductance equation with the driving current given
/// at the step start, midpoint and end.
double rk4_conductance_step(double g, double i0, double ih, double i1,
                            const HifParams& p, double dt) {
    const double a0 = std::abs(i0), ah = std::abs(ih), a1 = std::abs(i1);
    const double k1 = arc_rate(g, a0, p);
    const double k2 = arc_rate(g + 0.5 * dt * k1, ah, p);
    const double k3 = arc_rate(g + 0.5 * dt * k2, ah, p);
    const double k4 = arc_rate(g + dt * k3, a1, p);
    return g + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// phi1(z) = (1 - exp(-z))/z and phi2(z) = (z - 1 + exp(-z))/z^2 with series
/// fallbacks near zero. Used by the exact step of the linear loop equation.
void phi_functions(double z, double& phi1, double& phi2) {
    if (std::abs(z) < 1e-4) {
        phi1 = 1.0 - z / 2.0 + z * z / 6.0;
        phi2 = 0.5 - z / 6.0 + z * z / 24.0;
    } else {
        const double em = -std::expm1(-z);  // 1 - exp(-z)
        phi1 = em / z;
        phi2 = (z - em) / (z * z);
    }
}

/// Exact update of L di/dt = -R_tot i + v(t) over dt, with v linear between
/// v0 and v1. Stable for arbitrarily stiff R_tot/L.
double exp_rl_step(double i, double v0, double v1, double R_tot, double L, double dt) {
    const double a = R_tot / L;
    const double z = a * dt;
    double phi1, phi2;
    phi_functions(z, phi1, phi2);
    const double decay = std::exp(-z);
    return decay * i + dt / L * (phi1 * v0 + phi2 * (v1 - v0));
}

struct ArcBranchResult {
    std::vector<double> current;      // loop current at each local sample
    std::vector<double> conductance;  // arc conductance at each local sample
};

/// Integrates the arc loop: Thevenin EMF behind (R_th, L_th) in series with
/// the fault branch (R0 + arc). The loop current uses the exponential step
/// with the conductance frozen across the step; the conductance then takes an
/// RK4 step driven by the start/mid/end loop currents.
ArcBranchResult integrate_arc_branch(std::span<const double> emf, double R_th, double L_th,
                                     const HifParams& p, double dt) {
    ArcBranchResult out;
    const std::size_t n = emf.size();
    out.current.assign(n, 0.0);
    out.conductance.assign(n, 0.0);
    if (n == 0) return out;

    double i = 0.0;
    double g = p.g_init;
    out.conductance[0] = g;
    for (std::size_t s = 0; s + 1 < n; ++s) {
        if (!(g > 0.0) || !std::isfinite(g))
            throw SingularArcError("arc conductance left (0, inf) during simulation");
        const double R_tot = R_th + p.R0 + 1.0 / g;
        const double v0 = emf[s];
        const double v1 = emf[s + 1];
        const double vh = 0.5 * (v0 + v1);
        const double i_half = exp_rl_step(i, v0, vh, R_tot, L_th, 0.5 * dt);
        const double i_full = exp_rl_step(i_half, vh, v1, R_tot, L_th, 0.5 * dt);
        g = rk4_conductance_step(g, i, i_half, i_full, p, dt);
        i = i_full;
        out.current[s + 1] = i;
        out.conductance[s + 1] = g;
    }
    return out;
}

/// Truncates a switched branch at its first zero crossing at or after
/// `from`: samples from the crossing on are forced to zero, mimicking an
/// interrupter opening at current zero.
void cut_at_zero_crossing(std::vector<double>& i, std::size_t from) {
    if (from >= i.size()) return;
    std::size_t cut = i.size();
    for (std::size_t s = std::max<std::size_t>(from, 1); s < i.size(); ++s) {
        if (i[s] == 0.0 || (i[s - 1] < 0.0) != (i[s] < 0.0)) {
            cut = s;
            break;
        }
    }
    std::fill(i.begin() + static_cast<std::ptrdiff_t>(cut), i.end(), 0.0);
}

/// Deterministic standard-normal stream: mt19937_64 bits mapped through the
/// basic Box-Muller transform. std::normal_distribution is not pinned by the
/// standard, so reports would not be reproducible across toolchains with it.
class GaussianStream {
public:
    explicit GaussianStream(std::uint64_t seed) : rng_(seed) {}

    double next() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = std::max(uniform(), 0x1p-53);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * kPi * u2);
        have_spare_ = true;
        return r * std::cos(2.0 * kPi * u2);
    }

private:
    double uniform() { return static_cast<double>(rng_() >> 11) * 0x1p-53; }

    std::mt19937_64 rng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace

std::size_t SimConfig::sample_count() const {
    return static_cast<std::size_t>(std::llround(duration * sample_rate()));
}

void SimConfig::validate() const {
    require(system_frequency > 0.0, "system_frequency must be positive");
    require(samples_per_cycle >= 64, "samples_per_cycle must be at least 64");
    require(duration > 0.0, "duration must be positive");
    require(source_voltage_rms > 0.0, "source_voltage_rms must be positive");
    require(source_impedance.resistance >= 0.0, "source_impedance.resistance must be non-negative");
    require(source_impedance.inductance > 0.0, "source_impedance.inductance must be positive");
    require(transformer_ratio > 0.0, "transformer_ratio must be positive");
    require(baseline_load.resistance > 0.0, "baseline_load.resistance must be positive");
    require(baseline_load.inductance >= 0.0, "baseline_load.inductance must be non-negative");
    for (const auto& h : baseline_harmonics) {
        require(h.order >= 2, "baseline harmonic order must be at least 2");
        require(h.fraction >= 0.0, "baseline harmonic fraction must be non-negative");
    }
    require(noise_sigma >= 0.0, "noise_sigma must be non-negative");
    if (inrush) {
        require(inrush->peak_multiple >= 0.0, "inrush.peak_multiple must be non-negative");
        require(inrush->decay_tau > 0.0, "inrush.decay_tau must be positive");
        require(inrush->second_harmonic_fraction >= 0.0,
                "inrush.second_harmonic_fraction must be non-negative");
    }
    require(sample_count() >= 2, "record must contain at least two samples");
}

void HifParams::validate() const {
    require(R0 > 0.0, "R0 must be positive");
    require(tau > 0.0, "tau must be positive");
    require(u0 > 0.0, "u0 must be positive");
    require(r0 > 0.0, "r0 must be positive");
    require(g_init > 0.0, "g_init must be positive");
}

void RlParams::validate() const {
    require(R > 0.0, "R must be positive");
    require(L >= 0.0, "L must be non-negative");
}

void EventSchedule::normalize(double sim_duration) {
    std::stable_sort(events.begin(), events.end(),
                     [](const Event& a, const Event& b) { return a.onset < b.onset; });
    validate(sim_duration);
}

void EventSchedule::validate(double sim_duration) const {
    double prev = -1.0;
    for (const auto& ev : events) {
        require(ev.onset >= 0.0, "event onset must be non-negative");
        require(ev.duration > 0.0, "event duration must be positive");
        require(ev.onset + ev.duration <= sim_duration + 1e-9,
                "event must end within the simulated record");
        require(ev.onset >= prev, "events must be sorted by onset");
        prev = ev.onset;
        std::visit([](const auto& p) { p.validate(); }, ev.params);
    }
}

std::vector<const Event*> EventSchedule::hif_events() const {
    std::vector<const Event*> out;
    for (const auto& ev : events)
        if (ev.is_hif()) out.push_back(&ev);
    return out;
}

std::size_t Waveform::size() const {
    return channels.empty() ? 0 : channels.front().second.size();
}

bool Waveform::has_channel(const std::string& name) const {
    for (const auto& [key, _] : channels)
        if (key == name) return true;
    return false;
}

const std::vector<double>& Waveform::channel(const std::string& name) const {
    for (const auto& [key, values] : channels)
        if (key == name) return values;
    throw ParameterError("unknown waveform channel: " + name);
}

std::vector<double> Waveform::timestamps() const {
    std::vector<double> t(size());
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = time_at(i);
    return t;
}

std::vector<double> integrate_arc_conductance(std::span<const double> current,
                                              const HifParams& p, double dt) {
    p.validate();
    require(dt > 0.0, "dt must be positive");
    require(!current.empty(), "current series must be nonempty");
    for (std::size_t s = 0; s < current.size(); ++s)
        if (!std::isfinite(current[s])) throw NonFiniteSampleError(s);

    std::vector<double> g(current.size());
    double gv = p.g_init;
    g[0] = gv;
    for (std::size_t s = 0; s + 1 < current.size(); ++s) {
        const double i0 = current[s];
        const double i1 = current[s + 1];
        gv = rk4_conductance_step(gv, i0, 0.5 * (i0 + i1), i1, p, dt);
        if (!(gv > 0.0) || !std::isfinite(gv))
            throw SingularArcError("arc conductance left (0, inf)");
        g[s + 1] = gv;
    }
    return g;
}

double hif_branch_voltage(double current, double conductance, double series_resistance) {
    if (!(conductance > 0.0))
        throw SingularArcError("arc conductance must be positive");
    return current * series_resistance + current / conductance;
}

std::vector<double> simulate_rl_current(std::span<const double> voltage,
                                        const RlParams& p, double dt) {
    p.validate();
    require(dt > 0.0, "dt must be positive");
    std::vector<double> i(voltage.size());
    for (std::size_t s = 0; s < voltage.size(); ++s)
        if (!std::isfinite(voltage[s])) throw NonFiniteSampleError(s);
    if (voltage.empty()) return i;

    if (p.L == 0.0) {
        for (std::size_t s = 0; s < voltage.size(); ++s) i[s] = voltage[s] / p.R;
        return i;
    }

    const double inv_l = 1.0 / p.L;
    double iv = 0.0;
    i[0] = iv;
    for (std::size_t s = 0; s + 1 < voltage.size(); ++s) {
        const double v0 = voltage[s];
        const double v1 = voltage[s + 1];
        const double vh = 0.5 * (v0 + v1);
        const auto rate = [&](double x, double v) { return (v - p.R * x) * inv_l; };
        const double k1 = rate(iv, v0);
        const double k2 = rate(iv + 0.5 * dt * k1, vh);
        const double k3 = rate(iv + 0.5 * dt * k2, vh);
        const double k4 = rate(iv + dt * k3, v1);
        iv += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        i[s + 1] = iv;
    }
    return i;
}

Waveform synthesize(const SimConfig& cfg, const EventSchedule& schedule) {
    cfg.validate();
    schedule.validate(cfg.duration);

    const std::size_t n = cfg.sample_count();
    const double fs = cfg.sample_rate();
    const double dt = cfg.dt();
    const double omega = 2.0 * kPi * cfg.system_frequency;
    const double ratio = cfg.transformer_ratio;
    const double e_peak = std::numbers::sqrt2 * cfg.source_voltage_rms / ratio;
    const double R_th = cfg.source_impedance.resistance / (ratio * ratio);
    const double L_th = cfg.source_impedance.inductance / (ratio * ratio);

    // Secondary-side Thevenin EMF samples.
    std::vector<double> emf(n);
    for (std::size_t s = 0; s < n; ++s)
        emf[s] = e_peak * std::sin(omega * static_cast<double>(s) * dt);

    // Baseline load in steady state (energized long before the record).
    const double R_base = R_th + cfg.baseline_load.resistance;
    const double X_base = omega * (L_th + cfg.baseline_load.inductance);
    const double z_base = std::hypot(R_base, X_base);
    const double phase_base = std::atan2(X_base, R_base);
    const double i_base_peak = e_peak / z_base;
    std::vector<double> i_baseline(n);
    for (std::size_t s = 0; s < n; ++s) {
        const double arg = omega * static_cast<double>(s) * dt - phase_base;
        double i = std::sin(arg);
        for (const auto& h : cfg.baseline_harmonics)
            i += h.fraction * std::sin(static_cast<double>(h.order) * arg);
        i_baseline[s] = i_base_peak * i;
    }

    std::vector<double> i_fault(n, 0.0);
    std::vector<double> i_benign(n, 0.0);
    std::vector<std::uint8_t> labels(n, 0);

    for (const auto& ev : schedule.events) {
        const std::size_t first = grid_index(ev.onset, fs, n);
        const std::size_t last = grid_index(ev.end(), fs, n);
        if (first >= n) continue;

        if (const auto* hif = std::get_if<HifParams>(&ev.params)) {
            // Integrate up to one extra cycle past the scheduled end so the
            // arc can extinguish at a current zero instead of chopping mid-wave.
            const std::size_t tail = std::min(n, last + static_cast<std::size_t>(fs / cfg.system_frequency));
            const std::span<const double> drive(emf.data() + first, tail - first);
            auto branch = integrate_arc_branch(drive, R_th, L_th, *hif, dt);
            cut_at_zero_crossing(branch.current, last - first);
            for (std::size_t s = 0; s < branch.current.size(); ++s)
                i_fault[first + s] += branch.current[s];
            std::fill(labels.begin() + static_cast<std::ptrdiff_t>(first),
                      labels.begin() + static_cast<std::ptrdiff_t>(last), std::uint8_t{1});
        } else {
            // Switched-in loads stay connected for the rest of the record; the
            // event duration bounds the transient, not the branch lifetime.
            const auto& rl = std::get<RlParams>(ev.params);
            RlParams loop{rl.R + R_th, rl.L + L_th, rl.kind};
            const std::span<const double> drive(emf.data() + first, n - first);
            auto current = simulate_rl_current(drive, loop, dt);
            // Breaker-pole / machine-flux surrogate: the branch current builds
            // over one cycle instead of stepping in with a full DC offset.
            const std::size_t ramp = std::min(current.size(),
                                              static_cast<std::size_t>(fs / cfg.system_frequency));
            for (std::size_t s = 0; s < ramp; ++s)
                current[s] *= 0.5 - 0.5 * std::cos(kPi * static_cast<double>(s) / static_cast<double>(ramp));
            for (std::size_t s = 0; s < current.size(); ++s)
                i_benign[first + s] += current[s];
        }
    }

    // Reflect to the primary and add seeded measurement noise.
    const double i_base_primary_peak = i_base_peak / ratio;
    GaussianStream noise(cfg.rng_seed);
    const double sigma = cfg.noise_sigma * i_base_primary_peak;

    std::vector<double> i_primary(n);
    for (std::size_t s = 0; s < n; ++s) {
        double i = (i_baseline[s] + i_fault[s] + i_benign[s]) / ratio;
        if (cfg.inrush && cfg.inrush->peak_multiple > 0.0) {
            const double t = static_cast<double>(s) * dt;
            const double scale = cfg.inrush->peak_multiple * i_base_primary_peak /
                                 (1.0 + cfg.inrush->second_harmonic_fraction);
            i += scale * std::exp(-t / cfg.inrush->decay_tau) *
                 (std::cos(omega * t) + cfg.inrush->second_harmonic_fraction * std::cos(2.0 * omega * t));
        }
        if (sigma > 0.0) i += sigma * noise.next();
        i_primary[s] = i;
    }

    Waveform w;
    w.sample_rate = fs;
    w.t0 = 0.0;
    w.channels.emplace_back("i_primary", std::move(i_primary));
    w.channels.emplace_back("i_baseline", std::move(i_baseline));
    w.channels.emplace_back("i_fault", std::move(i_fault));
    w.channels.emplace_back("i_benign", std::move(i_benign));
    w.labels = std::move(labels);
    return w;
}

}  // namespace hifd::wavesim

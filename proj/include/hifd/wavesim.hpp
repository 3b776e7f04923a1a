#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace hifd::wavesim {

/// Series impedance of the Thevenin source feeding the transformer primary.
struct SourceImpedance {
    double resistance = 18.0;   // ohm
    double inductance = 0.49;   // henry
};

/// Steady load connected on the secondary for the whole record.
struct BaselineLoad {
    double resistance = 7.8;    // ohm
    double inductance = 0.010;  // henry
};

/// One background-distortion component of the baseline load current,
/// phase-locked to the fundamental: fraction * I1 * sin(order * (wt - phi)).
struct Harmonic {
    int order = 0;
    double fraction = 0.0;  // relative to the fundamental amplitude
};

/// Optional energization inrush surrogate: a decaying DC-offset template with
/// a second-harmonic component, added to the primary current at t = 0.
struct InrushParams {
    double peak_multiple = 0.0;            // peak as a multiple of baseline amplitude; 0 disables
    double decay_tau = 0.1;                // seconds
    double second_harmonic_fraction = 0.3; // relative amplitude of the 2f term
};

struct SimConfig {
    double system_frequency = 60.0;   // Hz
    int samples_per_cycle = 2048;
    double duration = 2.0;            // seconds
    double source_voltage_rms = 115e3;
    SourceImpedance source_impedance;
    double transformer_ratio = 115.0 / 4.16;  // primary:secondary turns ratio
    BaselineLoad baseline_load;
    std::vector<Harmonic> baseline_harmonics;  // load nonlinearity distortion, empty = pure sine
    double noise_sigma = 0.002;       // Gaussian noise, per unit of baseline amplitude
    std::optional<InrushParams> inrush;
    std::uint64_t rng_seed = 1;

    [[nodiscard]] double sample_rate() const { return system_frequency * samples_per_cycle; }
    [[nodiscard]] double dt() const { return 1.0 / sample_rate(); }
    [[nodiscard]] std::size_t sample_count() const;

    /// Throws ParameterError when any field is out of range.
    void validate() const;
};

/// Kizilcay-style arc in series with a fixed resistance, forming the
/// high-impedance fault branch on the secondary side.
struct HifParams {
    double R0 = 40.0;      // series resistance, ohm
    double tau = 4e-4;     // arc time constant, seconds
    double u0 = 300.0;     // stationary arc voltage parameter, volt
    double r0 = 0.5;       // stationary arc resistance parameter, ohm
    double g_init = 0.05;  // conductance at fault inception, siemens

    void validate() const;
};

enum class RlKind { motor_start, load_switch };

/// Benign series RL branch switched in at the event onset.
struct RlParams {
    double R = 1.0;   // ohm
    double L = 0.01;  // henry
    RlKind kind = RlKind::load_switch;

    void validate() const;
};

struct Event {
    double onset = 0.0;     // seconds
    double duration = 0.05; // seconds
    std::variant<HifParams, RlParams> params;

    [[nodiscard]] bool is_hif() const { return std::holds_alternative<HifParams>(params); }
    [[nodiscard]] double end() const { return onset + duration; }
};

struct EventSchedule {
    std::vector<Event> events;  // sorted by onset

    /// Sorts by onset and checks every event lies inside [0, sim_duration).
    void normalize(double sim_duration);
    void validate(double sim_duration) const;
    [[nodiscard]] std::vector<const Event*> hif_events() const;
};

/// A sampled record. `channels` always holds "i_primary"; simulation also
/// fills per-branch channels for diagnostics. `labels[i]` is 1 when sample i
/// falls inside an HIF interval.
struct Waveform {
    double sample_rate = 0.0;  // Hz
    double t0 = 0.0;           // seconds
    std::vector<std::pair<std::string, std::vector<double>>> channels;
    std::vector<std::uint8_t> labels;

    [[nodiscard]] std::size_t size() const;
    [[nodiscard]] const std::vector<double>& channel(const std::string& name) const;
    [[nodiscard]] const std::vector<double>& primary() const { return channel("i_primary"); }
    [[nodiscard]] bool has_channel(const std::string& name) const;
    [[nodiscard]] double time_at(std::size_t i) const { return t0 + static_cast<double>(i) / sample_rate; }
    [[nodiscard]] std::vector<double> timestamps() const;
};

/// Integrates dg/dt = (1/tau) * (|i| / (u0 + r0*|i|) - g) over a sampled
/// current with classic RK4 at the sample step; RK4 stages take the current
/// at the step endpoints and their midpoint average. Starts at g = g_init
/// and returns g at every sample. Throws SingularArcError when the
/// conductance leaves (0, inf) and NonFiniteSampleError on bad input.
std::vector<double> integrate_arc_conductance(std::span<const double> current,
                                              const HifParams& p, double dt);

/// Fault-branch terminal voltage R0*i + i/g. Throws SingularArcError when
/// g <= 0.
double hif_branch_voltage(double current, double conductance, double series_resistance);

/// Integrates L di/dt = v - R i from i(0) = 0 with RK4 at the sample step.
/// L = 0 degenerates to the algebraic i = v/R.
std::vector<double> simulate_rl_current(std::span<const double> voltage,
                                        const RlParams& p, double dt);

/// Runs the full surrogate: stiff sinusoidal source behind the source
/// impedance, transformer modelled by its turns ratio, baseline load plus
/// scheduled event branches on the secondary, reflected to the primary, with
/// seeded Gaussian noise. Deterministic for a fixed (config, schedule).
Waveform synthesize(const SimConfig& cfg, const EventSchedule& schedule);

}  // namespace hifd::wavesim

#pragma once

#include "hrec/hierarchy.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace hrec {

enum class PanelKind { observations, forecasts };

class DatasetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// n x T values aligned to a hierarchy's row order; column t is time t.
struct SeriesPanel {
    std::shared_ptr<const Hierarchy> h;
    Matrix values;
    std::vector<std::string> timestamps;
    PanelKind kind = PanelKind::forecasts;

    std::size_t n() const { return static_cast<std::size_t>(values.rows()); }
    std::size_t T() const { return static_cast<std::size_t>(values.cols()); }

    /// Columns [first, first + count).
    SeriesPanel slice(std::size_t first, std::size_t count) const;
};

/// Builds a panel and validates shape (and coherence for observations).
SeriesPanel make_panel(std::shared_ptr<const Hierarchy> h, Matrix values,
                       std::vector<std::string> timestamps, PanelKind kind);

/// Integer labels first, first+1, ... as strings.
std::vector<std::string> integer_timestamps(long long first, std::size_t count);

/// Labels continuing after `last` (integer continuation when possible).
std::vector<std::string> continue_timestamps(const std::vector<std::string>& existing, std::size_t count);

/// Throws DatasetError naming the first incoherent column.
void validate_observations(const SeriesPanel& panel);

SeriesPanel load_panel(std::shared_ptr<const Hierarchy> h, const std::filesystem::path& path, PanelKind kind);
void save_panel(const SeriesPanel& panel, const std::filesystem::path& path);

struct SyntheticSplit {
    SeriesPanel train;
    SeriesPanel test;
    Matrix train_noise;  // m x T bottom-level AR(1) noise
    Matrix test_noise;   // m x T_prime
};

/// Tuning knobs for the synthetic generator; defaults are used by synth_generate.
struct SynthOptions {
    int period = 4;
    double ar_coef = 0.5;
    double seasonal_amplitude = 5.0;
    double trend_scale = 0.2;
};

/**
 * Bottom series = level + trend + seasonal + AR(1) Gaussian noise.
 * Innovations have covariance Sigma_b over the first T points and
 * (1 + shift) * R * Sigma_b * R^T over the next T_prime, where R is a seeded
 * rotation that reduces to the identity at shift = 0. Upper rows are S * b.
 */
SyntheticSplit synth_generate(std::shared_ptr<const Hierarchy> h, std::size_t T, std::size_t T_prime,
                              std::uint64_t seed, double shift, const SynthOptions& opts = {});

/// Bottom-level innovation covariances used by synth_generate (train, test).
std::pair<Matrix, Matrix> synth_innovation_covariances(const Hierarchy& h, std::uint64_t seed, double shift);

}  // namespace hrec

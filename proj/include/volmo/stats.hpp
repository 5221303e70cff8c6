#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace volmo::stats {

struct BootstrapConfig {
  std::size_t sample_size = 30;
  std::size_t repeats = 100;
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const BootstrapConfig&, const BootstrapConfig&) = default;
};

/// Resample indices for every replicate, drawn with replacement from
/// [0, population) by the philox4x32-10/v1 scheme (stream = replicate,
/// position = draw). Persist it to score a second model on identical
/// replicates.
class ResampleSchedule {
 public:
  static ResampleSchedule generate(std::size_t population, const BootstrapConfig& config);

  const BootstrapConfig& config() const noexcept { return config_; }
  std::size_t population() const noexcept { return population_; }
  std::span<const std::size_t> replicate(std::size_t r) const;

  nlohmann::ordered_json to_json() const;
  static ResampleSchedule from_json(const nlohmann::json& j);

  friend bool operator==(const ResampleSchedule&, const ResampleSchedule&) = default;

 private:
  BootstrapConfig config_;
  std::size_t population_ = 0;
  std::vector<std::size_t> indices_;  // repeats x sample_size, row-major
};

/// Scores one replicate given the drawn instance indices.
using ReplicateMetric = std::function<double(std::span<const std::size_t> indices)>;

struct BootstrapSummary {
  std::string metric_id;
  std::vector<double> replicate_values;
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n - 1), 0 for one replicate
  BootstrapConfig config;
};

double mean_of(const std::vector<double>& xs);
double sample_std(const std::vector<double>& xs);

/// Evaluates `metric` on every replicate. `threads` > 1 evaluates replicates
/// concurrently; the result is identical to the sequential one.
BootstrapSummary bootstrap(const std::string& metric_id, const ResampleSchedule& schedule,
                           const ReplicateMetric& metric, unsigned threads = 1);
/// Throws Error(EmptyInput) when population is 0.
BootstrapSummary bootstrap(const std::string& metric_id, std::size_t population, const ReplicateMetric& metric,
                           const BootstrapConfig& config, unsigned threads = 1);

enum class WilcoxonMethod { Exact, NormalApprox };

struct WilcoxonResult {
  double statistic = 0.0;  // min(W+, W-)
  double w_plus = 0.0;
  double w_minus = 0.0;
  std::size_t n_effective = 0;
  std::size_t zeros_dropped = 0;
  WilcoxonMethod method = WilcoxonMethod::Exact;
  double p_value = 1.0;  // two-sided
};

/// Paired two-sided signed-rank test on a - b. Zero differences are dropped.
/// Exact when n_effective <= 25 and |d| has no ties, otherwise normal
/// approximation with tie correction and 0.5 continuity correction.
/// Throws LengthMismatch, or InsufficientPairs when fewer than 5 pairs remain.
WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& a, const std::vector<double>& b);

/// Number of sign assignments of ranks 1..n whose positive-rank sum is <= w.
std::uint64_t signed_rank_tail_count(std::size_t n, std::uint64_t w);

enum class Scale { Text, Percentage };

/// "0.1741 ± 0.0080" (Text, 4 decimals) or "64.58 ± 9.30" (Percentage, 2 decimals).
std::string format_summary(const BootstrapSummary& s, Scale scale);
/// "(p < 0.0001)" or "(p = 0.3172)".
std::string format_p(double p);
/// Summary of `summary` followed by the p-value. Throws ConfigMismatch when the
/// summaries differ in metric_id or config.
std::string format_comparison(const BootstrapSummary& summary, const BootstrapSummary& baseline,
                              const WilcoxonResult& test, Scale scale);

std::string_view to_string(WilcoxonMethod m) noexcept;
nlohmann::ordered_json to_json(const BootstrapConfig& c);
nlohmann::ordered_json to_json(const BootstrapSummary& s);
nlohmann::ordered_json to_json(const WilcoxonResult& w);

}  // namespace volmo::stats

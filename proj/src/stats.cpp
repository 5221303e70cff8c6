#include "volmo/stats.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

#include <fmt/format.h>

#include "volmo/error.hpp"
#include "volmo/philox.hpp"

namespace volmo::stats {

void BootstrapConfig::validate() const {
  if (sample_size < 1) throw Error(ErrorCode::InvalidArgument, "bootstrap sample_size must be at least 1");
  if (repeats < 1) throw Error(ErrorCode::InvalidArgument, "bootstrap repeats must be at least 1");
}

ResampleSchedule ResampleSchedule::generate(std::size_t population, const BootstrapConfig& config) {
  config.validate();
  if (population == 0) throw Error(ErrorCode::EmptyInput, "cannot resample an empty instance list");
  ResampleSchedule s;
  s.config_ = config;
  s.population_ = population;
  s.indices_.resize(config.repeats * config.sample_size);
  for (std::size_t r = 0; r < config.repeats; ++r)
    for (std::size_t d = 0; d < config.sample_size; ++d)
      s.indices_[r * config.sample_size + d] = Philox4x32::index(config.seed, r, d, population);
  return s;
}

std::span<const std::size_t> ResampleSchedule::replicate(std::size_t r) const {
  if (r >= config_.repeats) throw Error(ErrorCode::InvalidArgument, "replicate index out of range");
  return std::span<const std::size_t>(indices_).subspan(r * config_.sample_size, config_.sample_size);
}

nlohmann::ordered_json ResampleSchedule::to_json() const {
  nlohmann::ordered_json j;
  j["rng"] = Philox4x32::kSchemeName;
  j["config"] = stats::to_json(config_);
  j["population"] = population_;
  j["replicates"] = nlohmann::ordered_json::array();
  for (std::size_t r = 0; r < config_.repeats; ++r) {
    const auto row = replicate(r);
    j["replicates"].push_back(std::vector<std::size_t>(row.begin(), row.end()));
  }
  return j;
}

ResampleSchedule ResampleSchedule::from_json(const nlohmann::json& j) {
  try {
    ResampleSchedule s;
    s.config_.sample_size = j.at("config").at("sample_size").get<std::size_t>();
    s.config_.repeats = j.at("config").at("repeats").get<std::size_t>();
    s.config_.seed = j.at("config").at("seed").get<std::uint64_t>();
    s.config_.validate();
    s.population_ = j.at("population").get<std::size_t>();
    const auto& rows = j.at("replicates");
    if (rows.size() != s.config_.repeats) throw Error(ErrorCode::BadInput, "schedule replicate count disagrees with config");
    for (const auto& row : rows) {
      auto idx = row.get<std::vector<std::size_t>>();
      if (idx.size() != s.config_.sample_size) throw Error(ErrorCode::BadInput, "schedule row has the wrong sample size");
      for (auto i : idx)
        if (i >= s.population_) throw Error(ErrorCode::BadInput, "schedule index beyond population");
      s.indices_.insert(s.indices_.end(), idx.begin(), idx.end());
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadInput, std::string("bad resample schedule: ") + e.what());
  }
}

double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double sample_std(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean_of(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

BootstrapSummary bootstrap(const std::string& metric_id, const ResampleSchedule& schedule,
                           const ReplicateMetric& metric, unsigned threads) {
  const auto repeats = schedule.config().repeats;
  BootstrapSummary out;
  out.metric_id = metric_id;
  out.config = schedule.config();
  out.replicate_values.assign(repeats, 0.0);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t r = next++; r < repeats; r = next++) out.replicate_values[r] = metric(schedule.replicate(r));
  };
  threads = std::clamp<unsigned>(threads, 1, static_cast<unsigned>(std::min<std::size_t>(repeats, 256)));
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
  }
  out.mean = mean_of(out.replicate_values);
  out.std = sample_std(out.replicate_values);
  return out;
}

BootstrapSummary bootstrap(const std::string& metric_id, std::size_t population, const ReplicateMetric& metric,
                           const BootstrapConfig& config, unsigned threads) {
  return bootstrap(metric_id, ResampleSchedule::generate(population, config), metric, threads);
}

std::uint64_t signed_rank_tail_count(std::size_t n, std::uint64_t w) {
  const std::size_t max_sum = n * (n + 1) / 2;
  std::vector<std::uint64_t> ways(max_sum + 1, 0);
  ways[0] = 1;
  for (std::size_t rank = 1; rank <= n; ++rank)
    for (std::size_t s = max_sum; s >= rank; --s) ways[s] += ways[s - rank];
  std::uint64_t count = 0;
  for (std::size_t s = 0; s <= std::min<std::uint64_t>(w, max_sum); ++s) count += ways[s];
  return count;
}

WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size())
    throw Error(ErrorCode::LengthMismatch, "paired samples differ in length: " + std::to_string(a.size()) + " vs " +
                                               std::to_string(b.size()));
  WilcoxonResult out;
  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    if (diff == 0.0) ++out.zeros_dropped;
    else d.push_back(diff);
  }
  const std::size_t n = d.size();
  out.n_effective = n;
  if (n < 5) throw Error(ErrorCode::InsufficientPairs, std::to_string(n) + " non-zero paired differences, need 5");

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return std::abs(d[x]) < std::abs(d[y]); });

  std::vector<double> rank(n);
  bool ties = false;
  double tie_term = 0.0;  // sum of t^3 - t over tie groups
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && std::abs(d[order[j + 1]]) == std::abs(d[order[i]])) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
    const double t = static_cast<double>(j - i + 1);
    if (j > i) {
      ties = true;
      tie_term += t * t * t - t;
    }
    i = j + 1;
  }
  for (std::size_t i = 0; i < n; ++i) (d[i] > 0 ? out.w_plus : out.w_minus) += rank[i];
  out.statistic = std::min(out.w_plus, out.w_minus);

  if (n <= 25 && !ties) {
    out.method = WilcoxonMethod::Exact;
    const auto k = signed_rank_tail_count(n, static_cast<std::uint64_t>(out.statistic));
    out.p_value = std::min(1.0, 2.0 * static_cast<double>(k) / std::ldexp(1.0, static_cast<int>(n)));
    return out;
  }

  out.method = WilcoxonMethod::NormalApprox;
  const double nn = static_cast<double>(n);
  const double mean = nn * (nn + 1.0) / 4.0;
  const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
  if (var <= 0.0) {
    out.p_value = 1.0;
    return out;
  }
  const double z = std::max(0.0, std::abs(out.statistic - mean) - 0.5) / std::sqrt(var);
  out.p_value = std::clamp(std::erfc(z / std::sqrt(2.0)), std::numeric_limits<double>::min(), 1.0);
  return out;
}

std::string format_summary(const BootstrapSummary& s, Scale scale) {
  return scale == Scale::Text ? fmt::format("{:.4f} ± {:.4f}", s.mean, s.std) : fmt::format("{:.2f} ± {:.2f}", s.mean, s.std);
}

std::string format_p(double p) {
  if (p < 0.0001) return "(p < 0.0001)";
  return fmt::format("(p = {:.4f})", p);
}

std::string format_comparison(const BootstrapSummary& summary, const BootstrapSummary& baseline,
                              const WilcoxonResult& test, Scale scale) {
  if (summary.metric_id != baseline.metric_id)
    throw Error(ErrorCode::ConfigMismatch, "metric ids differ: " + summary.metric_id + " vs " + baseline.metric_id);
  if (!(summary.config == baseline.config))
    throw Error(ErrorCode::ConfigMismatch, "summaries were computed under different bootstrap configs");
  return format_summary(summary, scale) + " " + format_p(test.p_value);
}

std::string_view to_string(WilcoxonMethod m) noexcept { return m == WilcoxonMethod::Exact ? "exact" : "normal_approx"; }

nlohmann::ordered_json to_json(const BootstrapConfig& c) {
  return {{"sample_size", c.sample_size}, {"repeats", c.repeats}, {"seed", c.seed}, {"unit", "instance"}};
}

nlohmann::ordered_json to_json(const BootstrapSummary& s) {
  nlohmann::ordered_json j;
  j["metric_id"] = s.metric_id;
  j["mean"] = s.mean;
  j["std"] = s.std;
  j["std_denominator"] = "n-1";
  j["config"] = to_json(s.config);
  j["rng"] = Philox4x32::kSchemeName;
  j["replicate_values"] = s.replicate_values;
  return j;
}

nlohmann::ordered_json to_json(const WilcoxonResult& w) {
  return {{"statistic", w.statistic},         {"w_plus", w.w_plus},
          {"w_minus", w.w_minus},             {"n_effective", w.n_effective},
          {"zeros_dropped", w.zeros_dropped}, {"method", to_string(w.method)},
          {"p_value", w.p_value}};
}

}  // namespace volmo::stats

#pragma once

// Experiment runner: configuration, the experiment registry, CSV output and
// log-log slope fits.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ncmart/filtration.hpp"
#include "ncmart/random.hpp"
#include "ncmart/weights.hpp"

namespace ncmart {

// Common fields are parsed eagerly; everything else stays in `extra` and is
// read by the experiment that understands it. Unset optionals take the
// experiment's default.
struct ExperimentConfig {
    std::string experiment;
    std::uint64_t seed = 1;
    std::optional<double> p;
    std::optional<int> d;
    std::optional<int> J;
    // constant | dyadic-power(eps) | random-loguniform(sigma) | nonhomog(N) |
    // custom-file(path) | power-sweep(step)
    std::optional<std::string> weight_family;
    std::optional<int> trials;
    std::string output;
    bool timing = false;
    std::map<std::string, std::string> extra;

    // key=value assignment; throws ParameterError on malformed values.
    void set(const std::string& key, const std::string& value);
    double get(const std::string& key, double fallback) const;
    long long get_int(const std::string& key, long long fallback) const;
    std::string get_str(const std::string& key, const std::string& fallback) const;
};

// Lines "key = value"; '#' starts a comment.
ExperimentConfig parse_config(std::istream& is, ExperimentConfig base = {});

struct WeightFamily {
    std::string name;
    std::optional<double> param;
    std::string path;  // custom-file
};
WeightFamily parse_weight_family(const std::string& spec);

struct SlopeFit {
    double slope = 0.0;
    double stderr_ = 0.0;
    double intercept = 0.0;
    int points = 0;
};
// Least squares on (log x, log y). Needs >= 3 positive points with x spanning
// at least one decade; ParameterError otherwise.
SlopeFit fit_slope(const std::vector<std::pair<double, double>>& points);

struct SweepRow {
    int trial = 0;
    std::uint64_t seed = 0;
    double characteristic = 1.0;
    double lhs = 0.0;
    double rhs = 0.0;
    double ratio = 0.0;
    bool bound_ok = true;
    std::vector<double> extra;  // aligned with SweepResult::extra_columns
    double elapsed_ms = 0.0;
};

struct SweepResult {
    std::string experiment;
    std::vector<std::string> extra_columns;
    std::vector<SweepRow> rows;  // sorted by (characteristic, trial)
    std::optional<SlopeFit> slope;  // ratio against characteristic
    std::vector<std::string> failures;  // asserted invariants that failed

    bool ok() const { return failures.empty(); }
};

struct ExperimentInfo {
    std::string name;
    std::string description;
    std::function<SweepResult(const ExperimentConfig&)> run;
};

const std::vector<ExperimentInfo>& experiment_registry();

// Looks the experiment up (ParameterError if unknown) and runs it. Rows that
// violate lhs <= rhs (1 + 1e-6) are reported in failures.
SweepResult run_experiment(const ExperimentConfig& cfg);

// Header row then one row per SweepRow; 17 significant digits.
std::string to_csv(const SweepResult& r);
// experiment,rows,failures,slope,slope_stderr,slope_points
std::string summary_csv(const SweepResult& r);
// Writes to_csv to path and summary_csv to path + ".summary.csv". Throws
// ParameterError if either cannot be written.
void write_outputs(const SweepResult& r, const std::string& path);

// RFC 4180 field quoting.
std::string csv_field(const std::string& s);
std::string csv_number(double x);

}  // namespace ncmart

#pragma once

// Config-driven experiments with resumable, deterministic output.

#include <atomic>
#include <cstdint>
#include <exception>
#include <functional>
#include <iosfwd>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "fermipair/effective_dynamics.hpp"
#include "fermipair/potentials.hpp"

namespace fermipair {

inline constexpr const char* kVersion = "fermipair 1.0.0";
inline constexpr int kSchema = 1;

enum class Experiment { potential, scaling, bounds, proposition2, certify };
Experiment parse_experiment(const std::string& s);
std::string to_string(Experiment e);

struct XiSpec {
    std::string family = "gaussian";  // gaussian | random
    double sigma = 0.4;
    double separation = 0;  // second impurity offset along the first axis
    double p_cut = 3;       // random family
};

struct WSpec {
    std::string kind = "zero";  // zero | gaussian | table
    double amplitude = 0, width = 1;
    std::string path;
    double relative_bound = -1;  // >= 0 marks a table as unbounded
};

struct ExperimentConfig {
    Experiment experiment = Experiment::potential;
    int d = 1;
    std::vector<double> L{2 * kPi};
    std::vector<double> kF{2, 4, 8};
    // nullopt means |lambda| = k_F^{(2-d)/2}
    std::optional<double> lambda;
    int n = 1;
    nlohmann::json spec = {{"kind", "yukawa"}, {"R", 1.0}};
    WSpec w;
    XiSpec xi0;
    std::vector<double> t{0.5};
    double rel_tol = 1e-6;
    double krylov_tol = 1e-10;
    double tail_tol = 0.01;
    int m_max = 3;
    double cutoff_multiplier = 4;
    double cutoff_delta = -1;  // > 0: cutoff = k_F + delta, overrides the multiplier
    int M_imp = 16;
    std::size_t max_states = 60'000'000;
    std::string method = "quadrature";
    double r_max = 6;
    int r_points = 61;
    bool lemma2 = true, lemmaA1 = true;
    double a1_kF_max = 8;  // nested sums (8), (9) only up to this k_F
    std::string output = "out";
    std::uint64_t seed = 1;

    // Rejects unknown keys and keys that do not belong to the experiment.
    static ExperimentConfig from_json(const nlohmann::json& j);
    static ExperimentConfig load(const std::string& path);
    nlohmann::json to_json() const;  // canonical, defaults filled in
    std::string hash() const;        // FNV-1a over the canonical form without "output"

    double coupling(double kF) const;
    double cutoff(double kF) const;
};

PotentialSpec make_spec(const nlohmann::json& j);
ImpurityPotential make_w(const WSpec& w, double r_max);
ImpurityState make_xi0(const ImpurityGrid& g, const XiSpec& x, std::uint64_t seed);
// Distinct minimal-image distances on the impurity grid, ascending.
std::vector<double> grid_distances(const ImpurityGrid& g);

struct RunOptions {
    std::string out_dir;  // empty: use config.output
    int threads = 1;
    bool dry_run = false;
    std::ostream* log = nullptr;
};

struct RunResult {
    nlohmann::json report;
    std::vector<std::string> files;
    std::size_t resumed_points = 0;
};

RunResult run_potential(const ExperimentConfig& c, const RunOptions& o);
RunResult run_scaling(const ExperimentConfig& c, const RunOptions& o);
RunResult run_bounds(const ExperimentConfig& c, const RunOptions& o);
RunResult run_proposition2(const ExperimentConfig& c, const RunOptions& o);
RunResult run_certify(const ExperimentConfig& c, const RunOptions& o);
RunResult run_experiment(const ExperimentConfig& c, const RunOptions& o);

// f(i) for i in [0, count) on up to `threads` workers. Results land by index,
// so the output does not depend on the thread count. The exception of the
// lowest failing index is rethrown.
template <class F>
auto parallel_map(std::size_t count, int threads, F&& f) -> std::vector<decltype(f(std::size_t{}))> {
    using R = decltype(f(std::size_t{}));
    std::vector<std::optional<R>> slot(count);
    std::vector<std::exception_ptr> err(count);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < count;) {
            try {
                slot[i].emplace(f(i));
            } catch (...) {
                err[i] = std::current_exception();
            }
        }
    };
    const std::size_t nt = std::min<std::size_t>(std::max(threads, 1), std::max<std::size_t>(count, 1));
    std::vector<std::thread> pool;
    for (std::size_t k = 1; k < nt; ++k) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    for (auto& e : err)
        if (e) std::rethrow_exception(e);
    std::vector<R> out;
    out.reserve(count);
    for (auto& s : slot) out.push_back(std::move(*s));
    return out;
}

// manifest.json in the output directory: config, hash, finished points.
class Manifest {
public:
    Manifest(const std::string& dir, const ExperimentConfig& c);
    std::optional<nlohmann::json> point(const std::string& key) const;
    void record(const std::string& key, const nlohmann::json& value, double seconds);
    void finish(const nlohmann::json& report, double seconds);
    const std::string& dir() const { return dir_; }

private:
    void flush() const;
    std::string dir_;
    nlohmann::json doc_;
    mutable std::mutex mu_;
};

}  // namespace fermipair

#ifndef QPLAB_RUNNER_HPP
#define QPLAB_RUNNER_HPP

// Experiment orchestration behind the qplab command line: configuration layering,
// validation, subcommand dispatch, JSON-lines/CSV output and parameter sweeps.
// Requires nlohmann/json on the include path.

#include "qplab/config.hpp"
#include "qplab/duality.hpp"
#include "qplab/parallel.hpp"
#include "qplab/reduce.hpp"
#include "qplab/spectral.hpp"
#include "qplab/weighted.hpp"

#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>

namespace qplab {

inline constexpr const char* kVersion = "0.1.0";

inline const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> names = {"spectrum", "transport", "cocycle", "ids",
                                                   "duality",  "reduce",    "verify-lemmas", "sweep"};
    return names;
}

/// Every recognised key with its default value and type.
inline Config default_config() {
    return Config::parse(R"(
[model]
potential: str = amo
lambda: f64 = 0.2
coeffs: f64[] =
alpha: f64 = 0.6180339887498949
alpha_digits: i64[] =
alpha2: f64 = 0.41421356237309515
x: f64 = 0
theta: f64 = 0.1

[discretization]
N: i64 = 256
ids_N: i64 = 1024
phases: i64 = 32
theta_count: i64 = 64
x_grid: i64 = 256
n_steps: i64 = 100000
max_frames: i64 = 40

[task]
side: str = direct
T: f64[] = 25, 50, 100, 200
p: f64[] = 2
K: f64[] = -0.5, 0.5
E: f64[] =
E_range: f64[] = -2.5, 2.5
E_points: i64 = 50
t: f64[] = 5, 10, 20, 50
s: f64 = 2
r: f64 = 0.5
s1: f64 = 2
s2: f64 = 2
trials: i64 = 50

[sweep]
command: str = transport
axis: str = T
values: f64[] = 25, 50, 100, 200

[output]
dir: str = qplab_out

[run]
seed: i64 = 1
jobs: i64 = 0
)",
                         "defaults");
}

/// Lays `user` over the defaults. Unknown keys and type changes are errors.
inline Config merge_with_defaults(const Config& user) {
    Config c = default_config();
    for (const auto& [sec, keys] : user.sections())
        for (const auto& [key, v] : keys) {
            if (!c.has(sec, key)) throw ConfigError("unknown configuration key " + sec + "." + key);
            const auto& d = c.raw(sec, key);
            bool widen = std::holds_alternative<std::int64_t>(v) &&
                         (std::holds_alternative<double>(d) || std::holds_alternative<std::vector<double>>(d));
            bool list = std::holds_alternative<double>(v) && std::holds_alternative<std::vector<double>>(d);
            if (v.index() != d.index() && !widen && !list)
                throw ConfigError(sec + "." + key + " must have type " + detail::type_name(d));
            if (widen && std::holds_alternative<double>(d))
                c.set(sec, key, static_cast<double>(std::get<std::int64_t>(v)));
            else if (widen)
                c.set(sec, key, std::vector<double>{static_cast<double>(std::get<std::int64_t>(v))});
            else if (list)
                c.set(sec, key, std::vector<double>{std::get<double>(v)});
            else
                c.set(sec, key, v);
        }
    return c;
}

/// `section.key=value`, typed like the existing entry.
inline void apply_assignment(Config& c, const std::string& assignment) {
    auto eq = assignment.find('='), dot = assignment.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq)
        throw ConfigError("expected section.key=value, got '" + assignment + "'");
    std::string sec = assignment.substr(0, dot), key = assignment.substr(dot + 1, eq - dot - 1);
    const auto& old = c.raw(sec, key);
    c.set(sec, key, parse_value(detail::type_name(old), detail::trim(assignment.substr(eq + 1)), assignment));
}

// ---------------------------------------------------------------------------
// validated task parameters

struct ModelSpec {
    Potential v;
    Frequency alpha;
    Point x;
    double theta = 0.0;
};

namespace detail {

inline void require(bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
}

inline int positive_int(const Config& c, const char* sec, const char* key, int lo, int hi) {
    auto v = c.get<std::int64_t>(sec, key);
    require(v >= lo && v <= hi, std::string(sec) + "." + key + " must lie in [" + std::to_string(lo) + ", " +
                                    std::to_string(hi) + "]");
    return static_cast<int>(v);
}

inline double finite(const Config& c, const char* sec, const char* key) {
    double v = c.get<double>(sec, key);
    require(std::isfinite(v), std::string(sec) + "." + key + " must be finite");
    return v;
}

}  // namespace detail

inline ModelSpec model_from(const Config& c) {
    using detail::require;
    ModelSpec m;
    const auto kind = c.get<std::string>("model", "potential");
    const double lambda = detail::finite(c, "model", "lambda");
    const auto coeffs = c.get<std::vector<double>>("model", "coeffs");
    for (double a : coeffs) require(std::isfinite(a), "model.coeffs must be finite");
    int dim = 1;
    if (kind == "zero")
        m.v = Potential::zero();
    else if (kind == "amo")
        m.v = Potential::almost_mathieu(lambda);
    else if (kind == "cosine_series")
        m.v = Potential::cosine_series(coeffs);
    else if (kind == "two_frequency") {
        require(coeffs.size() == 2, "two_frequency needs model.coeffs = a, b");
        m.v = Potential::two_frequency(coeffs[0], coeffs[1]);
        dim = 2;
    } else
        throw ConfigError("unknown potential '" + kind + "' (zero, amo, cosine_series, two_frequency)");

    auto digits = c.get<std::vector<std::int64_t>>("model", "alpha_digits");
    if (!digits.empty()) {
        require(dim == 1, "continued-fraction digits describe a single frequency");
        m.alpha = Frequency::from_digits(std::vector<double>(digits.begin(), digits.end()));
    } else if (dim == 1) {
        m.alpha = Frequency::from_value(detail::finite(c, "model", "alpha"));
    } else {
        m.alpha = Frequency::from_vector({detail::finite(c, "model", "alpha"), detail::finite(c, "model", "alpha2")});
    }
    m.x = Point(static_cast<std::size_t>(dim), detail::finite(c, "model", "x"));
    m.theta = detail::finite(c, "model", "theta");
    return m;
}

inline EnergyWindowSet windows_from(const Config& c) {
    auto k = c.get<std::vector<double>>("task", "K");
    if (k.empty()) return EnergyWindowSet::everything();
    detail::require(k.size() % 2 == 0, "task.K must list interval end points in pairs");
    std::vector<std::pair<double, double>> iv;
    for (std::size_t i = 0; i < k.size(); i += 2) {
        detail::require(std::isfinite(k[i]) && std::isfinite(k[i + 1]), "task.K must be finite");
        iv.emplace_back(k[i], k[i + 1]);
    }
    return EnergyWindowSet(std::move(iv));
}

inline std::vector<double> energies_from(const Config& c) {
    auto e = c.get<std::vector<double>>("task", "E");
    for (double x : e) detail::require(std::isfinite(x), "task.E must be finite");
    if (!e.empty()) return e;
    auto range = c.get<std::vector<double>>("task", "E_range");
    detail::require(range.size() == 2 && range[0] < range[1], "task.E_range must be two increasing values");
    int n = detail::positive_int(c, "task", "E_points", 1, 100000);
    std::vector<double> out;
    for (int i = 0; i < n; ++i) out.push_back(n == 1 ? range[0] : range[0] + (range[1] - range[0]) * i / (n - 1));
    return out;
}

inline std::vector<double> positive_list(const Config& c, const char* key) {
    auto v = c.get<std::vector<double>>("task", key);
    for (double x : v) detail::require(std::isfinite(x) && x > 0, std::string("task.") + key + " must be positive");
    return v;
}

inline int jobs_from(const Config& c) {
    auto j = c.get<std::int64_t>("run", "jobs");
    detail::require(j >= 0 && j <= 4096, "run.jobs must lie in [0, 4096]");
    if (j == 0) return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    return static_cast<int>(j);
}

/// Checks every parameter the command reads. Nothing touches the file system.
inline void validate(const std::string& command, const Config& c) {
    using detail::require;
    if (std::find(subcommands().begin(), subcommands().end(), command) == subcommands().end())
        throw ConfigError("unknown command '" + command + "'");
    auto m = model_from(c);
    detail::positive_int(c, "discretization", "N", 1, 4096);
    detail::positive_int(c, "discretization", "ids_N", 16, 4096);
    detail::positive_int(c, "discretization", "phases", 8, 4096);
    detail::positive_int(c, "discretization", "theta_count", 1, 4096);
    detail::positive_int(c, "discretization", "x_grid", 8, 65536);
    detail::positive_int(c, "discretization", "n_steps", 1000, 1000000000);
    detail::positive_int(c, "discretization", "max_frames", 1, 100000);
    detail::positive_int(c, "task", "trials", 1, 100000);
    require(c.get<std::int64_t>("run", "seed") >= 0, "run.seed must be non-negative");
    jobs_from(c);
    windows_from(c);
    energies_from(c);
    positive_list(c, "T");
    positive_list(c, "p");
    positive_list(c, "t");
    for (const char* k : {"s", "r", "s1", "s2"}) detail::finite(c, "task", k);
    auto side = c.get<std::string>("task", "side");
    require(side == "direct" || side == "dual", "task.side must be direct or dual");
    const bool needs_d1 = command == "transport" || command == "duality" || command == "reduce" ||
                          (command == "spectrum" && side == "dual");
    require(!needs_d1 || m.alpha.dim() == 1, command + " is implemented for one frequency");
    if (command == "duality") require(c.get<std::int64_t>("discretization", "theta_count") >= 64,
                                      "duality profiles need discretization.theta_count >= 64");
    if (command == "verify-lemmas") {
        require(c.get<double>("task", "s1") + c.get<double>("task", "s2") > 1.0, "verify-lemmas needs s1 + s2 > 1");
        double s = c.get<double>("task", "s"), r = c.get<double>("task", "r");
        require(r >= 0 && r < s / 2 - 0.25, "verify-lemmas needs 0 <= r < s/2 - 1/4");
        require(s > 0 && s < c.get<double>("task", "s1") + c.get<double>("task", "s2") - 0.5,
                "verify-lemmas needs 0 < s < s1 + s2 - 1/2");
    }
}

// ---------------------------------------------------------------------------
// records and tables

struct ResultRecord {
    std::string task;
    std::string input_digest;
    nlohmann::json payload;
    std::string config_digest;
    double wall_time = 0.0;  // seconds spent by the producing command

    nlohmann::json to_json() const {
        return {{"task", task},
                {"input_digest", input_digest},
                {"payload", payload},
                {"provenance", {{"version", kVersion}, {"config_digest", config_digest}}},
                {"wall_time_s", wall_time}};
    }
};

struct Table {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
};

struct RunOutput {
    std::vector<ResultRecord> records;
    std::vector<Table> tables;
};

inline std::string format_cell(double x) { return std::isnan(x) ? std::string() : detail::format_double(x); }

inline void write_csv(std::ostream& os, const Table& t) {
    for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << t.columns[i];
    os << "\n";
    for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << format_cell(row[i]);
        os << "\n";
    }
}

/// Append-only JSON-lines file plus CSV tables in one directory. One writer per run.
class OutputWriter {
public:
    explicit OutputWriter(const std::filesystem::path& dir) : dir_(dir) {
        std::error_code ec;
        std::filesystem::create_directories(dir_, ec);
        if (ec) throw ResourceError("cannot create output directory " + dir_.string() + ": " + ec.message());
        jsonl_.open(dir_ / "records.jsonl", std::ios::app);
        if (!jsonl_) throw ResourceError("cannot open " + (dir_ / "records.jsonl").string());
    }

    /// Whole lines only, flushed immediately.
    void append(const ResultRecord& r) {
        std::lock_guard lock(mutex_);
        jsonl_ << r.to_json().dump() << "\n";
        jsonl_.flush();
        if (!jsonl_) throw ResourceError("write to records.jsonl failed");
    }

    void write_table(const Table& t) {
        auto tmp = dir_ / (t.name + ".csv.part");
        {
            std::ofstream os(tmp);
            if (!os) throw ResourceError("cannot write " + tmp.string());
            write_csv(os, t);
            if (!os) throw ResourceError("write to " + tmp.string() + " failed");
        }
        std::filesystem::rename(tmp, dir_ / (t.name + ".csv"));
    }

private:
    std::filesystem::path dir_;
    std::ofstream jsonl_;
    std::mutex mutex_;
};

namespace detail {

inline std::string fnv_hex(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline std::string number_key(const std::string& prefix, double x) { return prefix + format_double(x); }

struct Emitter {
    std::string command;
    const Config& config;
    RunOutput out;

    void record(const std::string& task, nlohmann::json payload) {
        ResultRecord r;
        r.task = task;
        r.payload = std::move(payload);
        r.input_digest = fnv_hex(command + "\n" + task + "\n" + config.serialize());
        r.config_digest = config.digest();
        out.records.push_back(std::move(r));
    }
};

inline void run_spectrum(const Config& c, Emitter& em) {
    auto m = model_from(c);
    const int n = static_cast<int>(c.get<std::int64_t>("discretization", "N"));
    const bool dual = c.get<std::string>("task", "side") == "dual";
    Window w(n, dual ? 1 : m.alpha.dim());
    auto op = dual ? build_dual(m.v, m.alpha, m.theta, w) : build_schrodinger(m.v, m.alpha, m.x, w);
    auto sys = diagonalize(op);
    Table t{"spectrum", {"index", "E"}, {}};
    for (int i = 0; i < sys.size(); ++i) t.rows.push_back({static_cast<double>(i), sys.values(i)});
    em.record("spectrum", {{"side", dual ? "dual" : "direct"},
                           {"N", n},
                           {"count", sys.size()},
                           {"min", sys.values(0)},
                           {"max", sys.values(sys.size() - 1)},
                           {"eigen_residual", eigen_residual(op, sys)}});
    em.out.tables.push_back(std::move(t));
}

inline void run_transport(const Config& c, Emitter& em, int jobs) {
    auto m = model_from(c);
    const int n = static_cast<int>(c.get<std::int64_t>("discretization", "N"));
    Window w(n);
    auto sys = diagonalize(build_schrodinger(m.v, m.alpha, m.x, w));
    auto K = windows_from(c);
    auto ids = ids_estimate(m.v, m.alpha, Window(static_cast<int>(c.get<std::int64_t>("discretization", "ids_N"))),
                            static_cast<int>(c.get<std::int64_t>("discretization", "phases")));
    auto Ts = c.get<std::vector<double>>("task", "T");
    auto ps = c.get<std::vector<double>>("task", "p");
    auto psi0 = delta_state(w);
    CVec g0 = apply_asymptotic_velocity(sys, K, ids, psi0);

    std::vector<nlohmann::json> payloads(Ts.size());
    parallel_for(static_cast<int>(Ts.size()), jobs, [&](int i) {
        const double T = Ts[static_cast<std::size_t>(i)];
        nlohmann::json p = {{"T", T}};
        bool horizon_ok = true;
        double bmass = 0.0;
        for (double order : ps) {
            auto mr = position_moment(sys, psi0, T, order);
            p[number_key("moment_p", order)] = mr.value;
            horizon_ok = horizon_ok && mr.horizon_ok;
            bmass = mr.boundary_mass;
        }
        if (ps.empty()) bmass = boundary_mass(evolve(sys, psi0, T), w);
        CVec q0 = apply_time_averaged_velocity(sys, K, T, psi0);
        p["boundary_mass"] = bmass;
        p["horizon_ok"] = horizon_ok;
        p["q_distance"] = (q0 - g0).norm();
        p["q_square_expectation"] = q0.squaredNorm();
        p["g_square_expectation"] = g0.squaredNorm();
        payloads[static_cast<std::size_t>(i)] = std::move(p);
    });

    Table t{"transport", {"T"}, {}};
    for (double order : ps) t.columns.push_back(number_key("moment_p", order));
    for (const char* col : {"boundary_mass", "q_distance", "q_square_expectation", "g_square_expectation"})
        t.columns.push_back(col);
    for (auto& p : payloads) {
        std::vector<double> row;
        for (const auto& col : t.columns) row.push_back(p[col].get<double>());
        t.rows.push_back(std::move(row));
        em.record("transport", std::move(p));
    }
    em.out.tables.push_back(std::move(t));
}

inline void run_cocycle(const Config& c, Emitter& em, int jobs) {
    auto m = model_from(c);
    auto energies = energies_from(c);
    const long steps = static_cast<long>(c.get<std::int64_t>("discretization", "n_steps"));
    std::vector<std::array<double, 3>> vals(energies.size());
    parallel_for(static_cast<int>(energies.size()), jobs, [&](int i) {
        double E = energies[static_cast<std::size_t>(i)];
        auto ly = lyapunov_exponent(E, m.v, m.alpha, m.x, steps, 8);
        vals[static_cast<std::size_t>(i)] = {ly.value, ly.phase_averaged, rotation_number(E, m.v, m.alpha, m.x, steps)};
    });
    Table t{"cocycle", {"E", "lyapunov", "lyapunov_phase_averaged", "rotation_number"}, {}};
    for (std::size_t i = 0; i < energies.size(); ++i) {
        t.rows.push_back({energies[i], vals[i][0], vals[i][1], vals[i][2]});
        em.record("cocycle", {{"E", energies[i]},
                              {"lyapunov", vals[i][0]},
                              {"lyapunov_phase_averaged", vals[i][1]},
                              {"rotation_number", vals[i][2]}});
    }
    em.out.tables.push_back(std::move(t));
}

inline void run_ids(const Config& c, Emitter& em, int jobs) {
    auto m = model_from(c);
    auto energies = energies_from(c);
    const long steps = static_cast<long>(c.get<std::int64_t>("discretization", "n_steps"));
    auto ids = ids_estimate(m.v, m.alpha,
                            Window(static_cast<int>(c.get<std::int64_t>("discretization", "ids_N")), m.alpha.dim()),
                            static_cast<int>(c.get<std::int64_t>("discretization", "phases")));
    Table table{"ids", {"E", "N"}, {}};
    for (int i = 0; i < ids.energies.size(); ++i) table.rows.push_back({ids.energies(i), ids.values(i)});
    em.out.tables.push_back(std::move(table));

    Point x0(static_cast<std::size_t>(m.v.dim()), 0.0);
    std::vector<double> rho(energies.size());
    parallel_for(static_cast<int>(energies.size()), jobs, [&](int i) {
        rho[static_cast<std::size_t>(i)] = rotation_number(energies[static_cast<std::size_t>(i)], m.v, m.alpha, x0, steps);
    });
    Table cons{"ids_rotation", {"E", "N", "rho", "deviation"}, {}};
    double worst = 0.0;
    for (std::size_t i = 0; i < energies.size(); ++i) {
        double n = ids(energies[i]), dev = std::abs(n - 1.0 + 2.0 * rho[i]);
        worst = std::max(worst, dev);
        cons.rows.push_back({energies[i], n, rho[i], dev});
        em.record("ids", {{"E", energies[i]}, {"N", n}, {"rho", rho[i]}, {"deviation", dev}});
    }
    em.record("ids.summary", {{"max_deviation", worst},
                              {"energies", energies.size()},
                              {"phases", ids.phase_count},
                              {"window_radius", ids.window.radius}});
    em.out.tables.push_back(std::move(cons));
}

inline void run_duality(const Config& c, Emitter& em, int jobs) {
    auto m = model_from(c);
    const int n = static_cast<int>(c.get<std::int64_t>("discretization", "N"));
    auto K = windows_from(c);
    DualityGrids g{Window(n), Window(n)};
    auto d = duality_defect(m.v, m.alpha, g, 4, static_cast<std::uint64_t>(c.get<std::int64_t>("run", "seed")));
    em.record("duality.defect", {{"interior", d.interior}, {"full", d.full}, {"radius", n}});

    auto prof = localization_profile(m.v, m.alpha, K, Window(n),
                                     static_cast<int>(c.get<std::int64_t>("discretization", "theta_count")),
                                     c.get<std::vector<double>>("task", "t"), jobs);
    em.record("duality.profile", {{"exponential_rate", prof.exponential.rate},
                                  {"exponential_prefactor", prof.exponential.prefactor},
                                  {"exponential_residual", prof.exponential.residual},
                                  {"power_rate", prof.power.rate},
                                  {"power_residual", prof.power.residual},
                                  {"fit_points", prof.exponential.points}});
    Table t{"profile", {"p", "h"}, {}};
    for (int i = 0; i < prof.h.size(); ++i) t.rows.push_back({static_cast<double>(i - n), prof.h(i)});
    em.out.tables.push_back(std::move(t));

    auto hd = spectra_hausdorff(m.v, m.alpha, n, 6, jobs);
    em.record("duality.hausdorff",
              {{"distance", hd.distance}, {"direct_count", hd.direct_count}, {"dual_count", hd.dual_count}});
}

inline void run_reduce(const Config& c, Emitter& em, int jobs) {
    auto m = model_from(c);
    const int n = static_cast<int>(c.get<std::int64_t>("discretization", "N"));
    const int x_grid = static_cast<int>(c.get<std::int64_t>("discretization", "x_grid"));
    const double s = c.get<double>("task", "s");
    Window w(n);
    DualFrameOptions opt;
    opt.x_grid = x_grid;
    auto pairs = dual_eigenpairs(m.v, m.alpha, windows_from(c), w,
                                 midpoint_thetas(static_cast<int>(c.get<std::int64_t>("discretization", "theta_count"))),
                                 opt);
    const std::size_t cap = static_cast<std::size_t>(c.get<std::int64_t>("discretization", "max_frames"));
    std::vector<DualEigenpair> chosen;
    for (std::size_t i = 0; i < std::min(cap, pairs.size()); ++i)
        chosen.push_back(pairs[pairs.size() <= cap ? i : i * pairs.size() / cap]);

    auto ids = ids_estimate(m.v, m.alpha, Window(static_cast<int>(c.get<std::int64_t>("discretization", "ids_N"))),
                            static_cast<int>(c.get<std::int64_t>("discretization", "phases")));
    std::vector<BlochFrame> frames(chosen.size());
    std::vector<std::string> failures(chosen.size());
    parallel_for(static_cast<int>(chosen.size()), jobs, [&](int i) {
        try {
            frames[static_cast<std::size_t>(i)] = frame_from_eigenpair(chosen[static_cast<std::size_t>(i)], m.v, m.alpha, w, x_grid);
        } catch (const DegenerateFrameError& e) {
            failures[static_cast<std::size_t>(i)] = e.what();
        }
    });

    Table t{"frames", {"E", "theta", "abs_d", "kotani_ratio", "residual", "l2", "hs", "cs_proxy"}, {}};
    std::vector<BlochFrame> kept;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        if (!failures[i].empty()) {
            em.record("reduce.frame", {{"E", chosen[i].E}, {"theta", chosen[i].theta}, {"degenerate", failures[i]}});
            continue;
        }
        const auto& fr = frames[i];
        double kotani = std::numeric_limits<double>::quiet_NaN();
        try {
            kotani = std::abs(fr.dk) * pi * ids_derivative(ids, fr.E);
        } catch (const RangeError&) {
        }
        auto norms = frame_norms(fr, s);
        nlohmann::json p = {{"E", fr.E},          {"theta", fr.theta},  {"abs_d", std::abs(fr.dk)},
                            {"residual", fr.residual}, {"l2", norms.l2}, {"hs", norms.hs},
                            {"cs_proxy", norms.cs_proxy}};
        p["kotani_ratio"] = std::isnan(kotani) ? nlohmann::json(nullptr) : nlohmann::json(kotani);
        t.rows.push_back({fr.E, fr.theta, std::abs(fr.dk), kotani, fr.residual, norms.l2, norms.hs, norms.cs_proxy});
        em.record("reduce.frame", std::move(p));
        kept.push_back(fr);
    }
    auto integral = integral_condition_estimate(kept, ids, s);
    em.record("reduce.integral", {{"value", integral.value},
                                  {"tail_share", integral.tail_share},
                                  {"frames", integral.frames},
                                  {"eigenpairs", pairs.size()},
                                  {"s", s}});
    em.out.tables.push_back(std::move(t));
}

inline void run_verify_lemmas(const Config& c, Emitter& em) {
    const double s1 = c.get<double>("task", "s1"), s2 = c.get<double>("task", "s2");
    const double s = c.get<double>("task", "s"), r = c.get<double>("task", "r");
    const auto seed = static_cast<std::uint64_t>(c.get<std::int64_t>("run", "seed"));
    std::vector<int> a_list = {0, 1, 2, 4, 8, 16, 32, 64, 128, 256, 512};
    auto conv = verify_convolution_lemma(s1, s2, a_list);
    em.record("lemma.convolution", {{"s1", s1},
                                    {"s2", s2},
                                    {"sum_at_zero", conv.sums.front()},
                                    {"constant", conv.constant},
                                    {"growth", conv.growth},
                                    {"decay_exponent", conv.decay_exponent},
                                    {"box_change", conv.box_change},
                                    {"passes", conv.passes}});
    Table t{"convolution", {"a", "sum", "scaled"}, {}};
    for (std::size_t i = 0; i < conv.sums.size(); ++i) t.rows.push_back({conv.a_norm[i], conv.sums[i], conv.constants[i]});
    em.out.tables.push_back(std::move(t));

    auto sq = sqrt_lemma_family(s, r, 1, -1, seed);
    em.record("lemma.sqrt", {{"s", s},
                             {"r", r},
                             {"constant", sq.constant},
                             {"constant_doubled", sq.constant_doubled},
                             {"box_change", sq.box_change},
                             {"scale_probe", sq.scale_probe},
                             {"all_hold", sq.all_hold},
                             {"passes", sq.passes},
                             {"members", sq.members}});

    auto cs = conv_sobolev_family(s1, s2, s, 1, static_cast<int>(c.get<std::int64_t>("task", "trials")), seed);
    em.record("lemma.conv_sobolev", {{"s1", s1},
                                     {"s2", s2},
                                     {"s", s},
                                     {"constant", cs.constant},
                                     {"box_change", cs.box_change},
                                     {"shift_growth", cs.shift_growth},
                                     {"passes", cs.passes},
                                     {"trials", cs.trials}});
}

}  // namespace detail

/// Runs one non-sweep command. Records come back in a fixed order; `jobs` only changes speed.
inline RunOutput run_command(const std::string& command, const Config& c, int jobs) {
    validate(command, c);
    if (command == "sweep") throw ConfigError("run_command does not run sweeps");
    detail::Emitter em{command, c, {}};
    auto start = std::chrono::steady_clock::now();
    if (command == "spectrum")
        detail::run_spectrum(c, em);
    else if (command == "transport")
        detail::run_transport(c, em, jobs);
    else if (command == "cocycle")
        detail::run_cocycle(c, em, jobs);
    else if (command == "ids")
        detail::run_ids(c, em, jobs);
    else if (command == "duality")
        detail::run_duality(c, em, jobs);
    else if (command == "reduce")
        detail::run_reduce(c, em, jobs);
    else
        detail::run_verify_lemmas(c, em);
    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    for (auto& r : em.out.records) r.wall_time = wall;
    return std::move(em.out);
}

// ---------------------------------------------------------------------------
// sweeps

inline const std::map<std::string, std::pair<std::string, std::string>>& sweep_axes() {
    static const std::map<std::string, std::pair<std::string, std::string>> axes = {
        {"E", {"task", "E"}},         {"T", {"task", "T"}},           {"N", {"discretization", "N"}},
        {"lambda", {"model", "lambda"}}, {"x", {"model", "x"}},        {"theta", {"model", "theta"}},
        {"s", {"task", "s"}}};
    return axes;
}

/// Config for one sweep point.
inline Config sweep_point(const Config& c, const std::string& axis, double value) {
    auto it = sweep_axes().find(axis);
    if (it == sweep_axes().end()) throw ConfigError("axis '" + axis + "' is not sweepable (E, T, N, lambda, x, theta, s)");
    const auto& [sec, key] = it->second;
    Config p = c;
    const auto& old = c.raw(sec, key);
    if (std::holds_alternative<std::int64_t>(old)) {
        if (value != std::floor(value) || std::abs(value) > 1e15)
            throw ConfigError("sweep value " + detail::format_double(value) + " for " + axis + " must be an integer");
        p.set(sec, key, static_cast<std::int64_t>(value));
    } else if (std::holds_alternative<std::vector<double>>(old)) {
        p.set(sec, key, std::vector<double>{value});
    } else {
        p.set(sec, key, value);
    }
    return p;
}

struct SweepPlan {
    std::string command;
    std::string axis;
    std::vector<double> values;  // sorted
    std::vector<Config> points;
};

inline SweepPlan plan_sweep(const Config& c) {
    SweepPlan plan;
    plan.command = c.get<std::string>("sweep", "command");
    plan.axis = c.get<std::string>("sweep", "axis");
    if (plan.command == "sweep") throw ConfigError("sweep.command cannot be sweep");
    if (!sweep_axes().count(plan.axis))
        throw ConfigError("axis '" + plan.axis + "' is not sweepable (E, T, N, lambda, x, theta, s)");
    validate(plan.command, c);
    plan.values = c.get<std::vector<double>>("sweep", "values");
    for (double v : plan.values)
        if (!std::isfinite(v)) throw ConfigError("sweep values must be finite");
    std::stable_sort(plan.values.begin(), plan.values.end());
    for (double v : plan.values) {
        plan.points.push_back(sweep_point(c, plan.axis, v));
        validate(plan.command, plan.points.back());
    }
    return plan;
}

namespace detail {

/// Flattens numeric payload fields into task.field columns; repeated tasks get an index.
inline std::map<std::string, double> flatten(const std::vector<ResultRecord>& records) {
    std::map<std::string, int> seen, count;
    for (const auto& r : records) ++count[r.task];
    std::map<std::string, double> row;
    for (const auto& r : records) {
        std::string prefix = r.task;
        if (count[r.task] > 1) prefix += "[" + std::to_string(seen[r.task]++) + "]";
        for (const auto& [k, v] : r.payload.items()) {
            if (v.is_number())
                row[prefix + "." + k] = v.get<double>();
            else if (v.is_boolean())
                row[prefix + "." + k] = v.get<bool>() ? 1.0 : 0.0;
        }
    }
    return row;
}

}  // namespace detail

/// Fan-out over sorted axis values, fan-in in sorted order. Records reach `sink` as soon as
/// every earlier point is done, so an interrupted sweep leaves a valid prefix.
template <class Sink>
Table run_sweep(const SweepPlan& plan, int jobs, Sink&& sink) {
    const int n = static_cast<int>(plan.points.size());
    std::vector<std::vector<ResultRecord>> results(static_cast<std::size_t>(n));
    std::vector<char> done(static_cast<std::size_t>(n), 0);
    int flushed = 0;
    std::mutex m;
    parallel_for(n, jobs, [&](int i) {
        auto out = run_command(plan.command, plan.points[static_cast<std::size_t>(i)], 1);
        for (auto& r : out.records) r.payload["sweep_" + plan.axis] = plan.values[static_cast<std::size_t>(i)];
        std::lock_guard lock(m);
        results[static_cast<std::size_t>(i)] = std::move(out.records);
        done[static_cast<std::size_t>(i)] = 1;
        while (flushed < n && done[static_cast<std::size_t>(flushed)]) {
            for (const auto& r : results[static_cast<std::size_t>(flushed)]) sink(r);
            ++flushed;
        }
    });

    std::vector<std::map<std::string, double>> rows;
    std::set<std::string> names;
    for (const auto& recs : results) {
        rows.push_back(detail::flatten(recs));
        for (const auto& [k, v] : rows.back()) names.insert(k);
    }
    names.erase(plan.command + ".sweep_" + plan.axis);
    Table t{"sweep", {plan.axis}, {}};
    t.columns.insert(t.columns.end(), names.begin(), names.end());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::vector<double> row{plan.values[i]};
        for (const auto& name : names) {
            auto it = rows[i].find(name);
            row.push_back(it == rows[i].end() ? std::numeric_limits<double>::quiet_NaN() : it->second);
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

inline Table run_sweep(const SweepPlan& plan, int jobs) {
    return run_sweep(plan, jobs, [](const ResultRecord&) {});
}

// ---------------------------------------------------------------------------
// top level

enum ExitCode : int { kExitOk = 0, kExitOther = 1, kExitConfig = 2, kExitResource = 3, kExitNumerical = 4 };

/// Maps the current exception to an exit code and writes a one-line message.
inline int exit_code_for_current_exception(std::ostream& err) {
    try {
        throw;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const InputError& e) {
        err << "input error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ResourceError& e) {
        err << "resource error: " << e.what() << "\n";
        return kExitResource;
    } catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitOther;
    }
}

/// Validates everything, then creates the output directory and writes results.
inline int run(const std::string& command, const Config& c, std::ostream& log, std::ostream& err) {
    try {
        const int jobs = jobs_from(c);
        std::filesystem::path dir = c.get<std::string>("output", "dir");
        if (dir.empty()) throw ConfigError("output.dir must not be empty");
        if (command == "sweep") {
            auto plan = plan_sweep(c);
            OutputWriter w(dir);
            auto table = run_sweep(plan, jobs, [&](const ResultRecord& r) { w.append(r); });
            w.write_table(table);
            log << "sweep over " << plan.axis << ": " << plan.values.size() << " points -> " << (dir / "sweep.csv").string()
                << "\n";
            return kExitOk;
        }
        validate(command, c);
        OutputWriter w(dir);
        auto out = run_command(command, c, jobs);
        for (const auto& r : out.records) w.append(r);
        for (const auto& t : out.tables) w.write_table(t);
        log << command << ": " << out.records.size() << " records -> " << dir.string() << "\n";
        return kExitOk;
    } catch (...) {
        return exit_code_for_current_exception(err);
    }
}

}  // namespace qplab

#endif

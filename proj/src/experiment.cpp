#include "focuslab/experiment.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "focuslab/error.hpp"

namespace focuslab {

InstanceBundle load_instance(const InstanceEntry& entry) {
    if (entry.spec) return build_instance(*entry.spec);
    InstanceBundle bundle{read_mdp_file(entry.file), std::nullopt, std::nullopt, std::nullopt, std::nullopt,
                          "file(" + entry.file.filename().string() + ")"};
    return bundle;
}

void ExperimentConfig::validate() const {
    if (instances.empty()) throw Error(ErrorCode::SchemaError, "instances: must not be empty");
    if (variants.empty()) throw Error(ErrorCode::SchemaError, "variants: must not be empty");
    if (T_grid.empty()) throw Error(ErrorCode::SchemaError, "T_grid: must not be empty");
    if (seeds.empty()) throw Error(ErrorCode::SchemaError, "seeds: must not be empty");
    for (std::size_t i = 0; i < T_grid.size(); ++i) {
        if (T_grid[i] < 2) throw Error(ErrorCode::SchemaError, "T_grid: every T must be at least 2");
        if (i > 0 && T_grid[i] <= T_grid[i - 1]) {
            throw Error(ErrorCode::SchemaError, "T_grid: not strictly increasing at index " + std::to_string(i));
        }
    }
    if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
        throw Error(ErrorCode::SchemaError, "seeds: seeds must be distinct");
    }
    std::set<std::string> labels;
    for (const auto& v : variants) {
        if (!labels.insert(v.label).second) {
            throw Error(ErrorCode::SchemaError, "variants: duplicate label '" + v.label + "'");
        }
    }
    if (workers < 1) throw Error(ErrorCode::SchemaError, "workers: must be at least 1");
    if (!(delta > 0.0 && delta < 1.0)) throw Error(ErrorCode::SchemaError, "delta: must lie in (0,1)");
    if (!(var_bound_c >= 0.0)) throw Error(ErrorCode::SchemaError, "var_bound_c: must be nonnegative");
}

// ---------------------------------------------------------------------------
// YAML reading. Every accessor knows the dotted path of the node it reads so
// diagnostics can name the field and its line.

namespace {

class Field {
public:
    Field(YAML::Node node, std::string path, const std::string* source)
        : node_(std::move(node)), path_(std::move(path)), source_(source) {}

    [[noreturn]] void fail(ErrorCode code, const std::string& what) const {
        std::ostringstream os;
        os << *source_;
        const YAML::Mark mark = node_.Mark();
        if (mark.line >= 0) os << ':' << mark.line + 1 << ':' << mark.column + 1;
        os << ": " << path_ << ": " << what;
        throw Error(code, os.str());
    }

    const YAML::Node& node() const { return node_; }
    const std::string& path() const { return path_; }
    bool is_map() const { return node_.IsMap(); }
    bool is_seq() const { return node_.IsSequence(); }
    bool is_scalar() const { return node_.IsScalar(); }

    template <typename T>
    T as(const char* what) const {
        if (!node_.IsScalar()) fail(ErrorCode::SchemaError, std::string("expected ") + what);
        try {
            return node_.as<T>();
        } catch (const YAML::Exception&) {
            fail(ErrorCode::SchemaError, std::string("expected ") + what + ", got '" + node_.Scalar() + "'");
        }
    }

    std::string text() const { return as<std::string>("a string"); }
    double number() const { return as<double>("a number"); }
    long integer() const { return as<long>("an integer"); }
    bool boolean() const { return as<bool>("true or false"); }

    std::vector<Field> items() const {
        if (!node_.IsSequence()) fail(ErrorCode::SchemaError, "expected a list");
        std::vector<Field> out;
        for (std::size_t i = 0; i < node_.size(); ++i) {
            out.emplace_back(node_[i], path_ + "[" + std::to_string(i) + "]", source_);
        }
        return out;
    }

    /// Map entries in document order; rejects keys outside `allowed`.
    std::vector<std::pair<std::string, Field>> entries(std::initializer_list<const char*> allowed) const {
        if (!node_.IsMap()) fail(ErrorCode::SchemaError, "expected a mapping");
        std::vector<std::pair<std::string, Field>> out;
        for (const auto& kv : node_) {
            const std::string key = kv.first.as<std::string>();
            const std::string child = path_.empty() ? key : path_ + "." + key;
            if (std::find_if(allowed.begin(), allowed.end(), [&](const char* k) { return key == k; }) ==
                allowed.end()) {
                Field(kv.first, child, source_).fail(ErrorCode::SchemaError, "unknown key '" + key + "'");
            }
            out.emplace_back(key, Field(kv.second, child, source_));
        }
        return out;
    }

private:
    YAML::Node node_;
    std::string path_;
    const std::string* source_;
};

InstanceEntry read_instance(const Field& f) {
    InstanceEntry entry;
    if (f.is_scalar()) {
        try {
            entry.spec = parse_instance_spec(f.text());
        } catch (const Error& e) {
            f.fail(ErrorCode::SchemaError, e.detail());
        }
        return entry;
    }
    const auto fields = f.entries({"family", "B", "S", "A", "D", "target_state", "target_action", "member",
                                   "rewards", "gamma_support", "seed", "file"});
    InstanceSpec spec;
    bool has_family = false;
    for (const auto& [key, v] : fields) {
        if (key == "file") {
            entry.file = v.text();
        } else if (key == "family") {
            try {
                spec.family = family_from_string(v.text());
            } catch (const Error& e) {
                v.fail(ErrorCode::SchemaError, e.detail());
            }
            has_family = true;
        } else if (key == "B") spec.B = v.number();
        else if (key == "S") spec.S = static_cast<int>(v.integer());
        else if (key == "A") spec.A = static_cast<int>(v.integer());
        else if (key == "D") spec.D = v.number();
        else if (key == "target_state") spec.target_state = static_cast<int>(v.integer());
        else if (key == "target_action") spec.target_action = static_cast<int>(v.integer());
        else if (key == "member") spec.member = static_cast<int>(v.integer());
        else if (key == "gamma_support") spec.gamma_support = static_cast<int>(v.integer());
        else if (key == "seed") {
            const long seed = v.integer();
            if (seed < 0) v.fail(ErrorCode::SchemaError, "seed must be nonnegative");
            spec.seed = static_cast<std::uint64_t>(seed);
        } else if (key == "rewards") {
            for (const auto& r : v.items()) spec.rewards.push_back(r.number());
        }
    }
    if (has_family && !entry.file.empty()) f.fail(ErrorCode::SchemaError, "'family' and 'file' are mutually exclusive");
    if (!has_family && entry.file.empty()) f.fail(ErrorCode::SchemaError, "needs either 'family' or 'file'");
    if (has_family) entry.spec = spec;
    return entry;
}

AgentVariant read_variant(const Field& f, double default_delta, std::size_t index) {
    AgentVariant v;
    v.label = "variant" + std::to_string(index);
    v.delta = default_delta;
    bool has_H = false;
    const auto fields =
        f.entries({"label", "H", "gamma", "bonus", "solve", "clip", "exit", "delta", "constants"});
    for (const auto& [key, x] : fields) {
        if (key == "label") {
            v.label = x.text();
        } else if (key == "H") {
            has_H = true;
            const std::string s = x.text();
            if (s == "prior") v.h_policy = HPolicy::prior();
            else if (s == "priorless_avg") v.h_policy = HPolicy::priorless_avg();
            else if (s == "discounted_naive") v.h_policy = HPolicy::discounted_naive();
            else {
                const double h = x.number();
                if (!(h >= 1.0)) x.fail(ErrorCode::SchemaError, "H must be at least 1");
                v.h_policy = HPolicy::explicit_value(h);
            }
        } else if (key == "gamma") {
            if (x.text() == "avg_mode") {
                v.gamma_policy = GammaPolicy::avg_mode();
            } else {
                const double g = x.number();
                if (!(g > 0.0 && g < 1.0)) x.fail(ErrorCode::SchemaError, "gamma must lie in (0,1)");
                v.gamma_policy = GammaPolicy::explicit_value(g);
            }
        } else if (key == "bonus") {
            const std::string s = x.text();
            if (s == "bernstein") v.bonus_kind = BonusKind::Bernstein;
            else if (s == "hoeffding") v.bonus_kind = BonusKind::Hoeffding;
            else x.fail(ErrorCode::SchemaError, "expected bernstein or hoeffding");
        } else if (key == "solve") {
            const std::string s = x.text();
            if (s == "full") v.solve_mode = SolveMode::Full;
            else if (s == "one_step") v.solve_mode = SolveMode::OneStep;
            else x.fail(ErrorCode::SchemaError, "expected full or one_step");
        } else if (key == "clip") {
            v.clip_enabled = x.boolean();
        } else if (key == "exit") {
            const std::string s = x.text();
            if (s == "sandwich") v.exit_rule = ExitRule::SandwichBounds;
            else if (s == "residual") v.exit_rule = ExitRule::Residual;
            else if (s == "exact_m") v.exit_rule = ExitRule::ExactBudget;
            else x.fail(ErrorCode::SchemaError, "expected sandwich, residual or exact_m");
        } else if (key == "delta") {
            v.delta = x.number();
            if (!(v.delta > 0.0 && v.delta < 1.0)) x.fail(ErrorCode::SchemaError, "delta must lie in (0,1)");
        } else if (key == "constants") {
            for (const auto& [ck, cx] : x.entries({"variance", "linear", "union"})) {
                const double c = cx.number();
                if (!(c > 0.0)) cx.fail(ErrorCode::SchemaError, "constants must be positive");
                if (ck == "variance") v.constants.variance_coef = c;
                else if (ck == "linear") v.constants.linear_coef = c;
                else v.constants.union_coef = c;
            }
        }
    }
    if (!has_H) f.fail(ErrorCode::SchemaError, "H policy is required");
    return v;
}

std::vector<std::uint64_t> read_seeds(const Field& f) {
    std::vector<std::uint64_t> seeds;
    auto nonneg = [](const Field& x) {
        const long v = x.integer();
        if (v < 0) x.fail(ErrorCode::SchemaError, "seeds must be nonnegative");
        return static_cast<std::uint64_t>(v);
    };
    if (f.is_seq()) {
        for (const auto& x : f.items()) seeds.push_back(nonneg(x));
        return seeds;
    }
    std::optional<std::uint64_t> base;
    long count = -1;
    for (const auto& [key, x] : f.entries({"base", "count"})) {
        if (key == "base") base = nonneg(x);
        else count = x.integer();
    }
    if (!base || count < 1) f.fail(ErrorCode::SchemaError, "needs base and a positive count");
    for (long i = 0; i < count; ++i) seeds.push_back(*base + static_cast<std::uint64_t>(i));
    return seeds;
}

} // namespace

ExperimentConfig parse_config_text(const std::string& text, const std::string& source) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        std::ostringstream os;
        os << source << ':' << e.mark.line + 1 << ':' << e.mark.column + 1 << ": " << e.msg;
        throw Error(ErrorCode::ParseError, os.str());
    }
    const Field top(root, "", &source);
    if (!top.is_map()) top.fail(ErrorCode::ParseError, "config must be a mapping");

    ExperimentConfig cfg;
    const auto fields = top.entries({"version", "output_dir", "workers", "delta", "snapshots", "checkpoints",
                                     "var_bound_c", "instances", "variants", "T_grid", "seeds"});
    bool has_version = false;
    const Field* variants = nullptr;
    for (const auto& [key, f] : fields) {
        if (key == "version") {
            if (f.integer() != 1) f.fail(ErrorCode::SchemaError, "unsupported version (expected 1)");
            has_version = true;
        } else if (key == "output_dir") cfg.output_dir = f.text();
        else if (key == "workers") cfg.workers = static_cast<int>(f.integer());
        else if (key == "delta") cfg.delta = f.number();
        else if (key == "snapshots") cfg.snapshots = f.boolean();
        else if (key == "checkpoints") cfg.checkpoints = f.boolean();
        else if (key == "var_bound_c") cfg.var_bound_c = f.number();
        else if (key == "instances") {
            for (const auto& x : f.items()) cfg.instances.push_back(read_instance(x));
        } else if (key == "variants") {
            variants = &f;
        } else if (key == "T_grid") {
            for (const auto& x : f.items()) cfg.T_grid.push_back(x.integer());
        } else if (key == "seeds") {
            cfg.seeds = read_seeds(f);
        }
    }
    if (!has_version) top.fail(ErrorCode::SchemaError, "missing required key 'version'");
    // Variants read last so a top-level delta applies regardless of key order.
    if (variants != nullptr) {
        const auto items = variants->items();
        for (std::size_t i = 0; i < items.size(); ++i) cfg.variants.push_back(read_variant(items[i], cfg.delta, i));
    }
    try {
        cfg.validate();
    } catch (const Error& e) {
        throw Error(e.code(), source + ": " + e.detail());
    }
    return cfg;
}

ExperimentConfig parse_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open config " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), path.string());
}

// ---------------------------------------------------------------------------

std::string format_number(double x) {
    std::ostringstream os;
    os << std::setprecision(17) << x;
    return os.str();
}

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

std::string file_stem(const std::string& s) {
    std::string out;
    for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.') ? c : '_';
    return out;
}

} // namespace

void write_runs_csv(std::ostream& out, const std::vector<RunRow>& rows) {
    out << "instance_label,variant_label,T,seed,gamma,H,avg_regret,gamma_regret,var_star,episodes,"
           "reduction_check,wall_time_s\n";
    for (const auto& row : rows) {
        const RunRecord& r = row.record;
        out << csv_field(row.instance_label) << ',' << csv_field(row.variant_label) << ',' << r.horizon_T << ','
            << r.seed << ',' << format_number(r.gamma) << ',' << format_number(r.H) << ','
            << format_number(r.final_avg_regret) << ',' << format_number(r.final_gamma_regret) << ','
            << format_number(r.cumulative_variance) << ',' << r.episodes << ','
            << (row.reduction_check ? "pass" : "fail") << ',' << format_number(r.wall_time_s) << '\n';
    }
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
    out << "instance_label,variant_label,T,n_seeds,avg_regret_mean,avg_regret_std,gamma_regret_mean,"
           "gamma_regret_std,var_star_mean,episodes_mean\n";
    for (const auto& row : rows) {
        const CellSummary& s = row.summary;
        out << csv_field(row.instance_label) << ',' << csv_field(row.variant_label) << ',' << row.T << ','
            << s.n_seeds << ',' << format_number(s.avg_regret.mean) << ',' << format_number(s.avg_regret.std) << ','
            << format_number(s.gamma_regret.mean) << ',' << format_number(s.gamma_regret.std) << ','
            << format_number(s.var_star_mean) << ',' << format_number(s.episodes_mean) << '\n';
    }
}

void write_checkpoints_csv(std::ostream& out, const std::vector<Checkpoint>& checkpoints) {
    out << "t,cum_avg_regret,cum_gamma_regret,cum_var_star\n";
    for (const auto& c : checkpoints) {
        out << c.t << ',' << format_number(c.avg_regret) << ',' << format_number(c.gamma_regret) << ','
            << format_number(c.var_star) << '\n';
    }
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << contents;
    out.close();
    if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

bool ExperimentResult::verified() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckLine& c) { return c.pass; });
}

namespace {

void prepare_output(const std::filesystem::path& dir, bool checkpoints) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (!ec && checkpoints) std::filesystem::create_directories(dir / "checkpoints", ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create output directory " + dir.string() + ": " + ec.message());
    // Fail before any simulation if the directory is not writable.
    std::ostringstream header;
    write_runs_csv(header, {});
    write_file(dir / "runs.csv", header.str());
}

} // namespace

ExperimentResult execute(const ExperimentConfig& config, bool verify, std::ostream& log) {
    config.validate();
    prepare_output(config.output_dir, config.checkpoints);

    std::vector<InstanceBundle> bundles;
    std::vector<GainBias> gains;
    for (const auto& entry : config.instances) {
        bundles.push_back(load_instance(entry));
        gains.push_back(solve_gain_bias(bundles.back().mdp, kGainOracleTol));
    }

    // One oracle per (instance, gamma); gammas depend on variant and T.
    std::map<std::pair<std::size_t, double>, Oracles> oracle_cache;
    auto oracles_for = [&](std::size_t inst, double gamma) -> const Oracles& {
        auto key = std::make_pair(inst, gamma);
        auto it = oracle_cache.find(key);
        if (it == oracle_cache.end()) {
            it = oracle_cache.emplace(key, compute_oracles(bundles[inst].mdp, gamma, gains[inst])).first;
        }
        return it->second;
    };

    struct Cell {
        std::size_t instance;
        std::size_t variant;
        long T;
        const Oracles* oracles;
        std::size_t first_job;
    };
    std::vector<Cell> cells;
    std::vector<RunJob> jobs;
    for (std::size_t i = 0; i < bundles.size(); ++i) {
        for (std::size_t v = 0; v < config.variants.size(); ++v) {
            for (long T : config.T_grid) {
                const AgentVariant& variant = config.variants[v];
                const Oracles& oracles = oracles_for(i, resolve_gamma(variant.gamma_policy, T));
                cells.push_back({i, v, T, &oracles, jobs.size()});
                for (std::uint64_t seed : config.seeds) {
                    RunJob job;
                    job.bundle = &bundles[i];
                    job.oracles = &oracles;
                    job.config.agent = variant;
                    job.config.horizon_T = T;
                    job.config.seed = seed;
                    job.config.record_snapshots = config.snapshots;
                    job.context = bundles[i].label + " / " + variant.label + " / T=" + std::to_string(T) +
                                  " / seed=" + std::to_string(seed);
                    jobs.push_back(std::move(job));
                }
            }
        }
    }
    log << "running " << jobs.size() << " runs in " << cells.size() << " cells on " << config.workers
        << " worker(s)\n";
    std::vector<RunRecord> records = run_many(jobs, config.workers);

    ExperimentResult result;
    const std::size_t n_seeds = config.seeds.size();
    for (const Cell& cell : cells) {
        const std::string& inst_label = bundles[cell.instance].label;
        const AgentVariant& variant = config.variants[cell.variant];
        std::vector<RunRecord> cell_records(records.begin() + static_cast<std::ptrdiff_t>(cell.first_job),
                                            records.begin() + static_cast<std::ptrdiff_t>(cell.first_job + n_seeds));
        long reduction_pass = 0;
        long var_pass = 0;
        long episodes_pass = 0;
        long solves_pass = 0;
        long violating_seeds = 0;
        bool audited = false;
        double worst_c = 0.0;
        for (const RunRecord& r : cell_records) {
            const RunVerdict verdict = judge_run(r, *cell.oracles, config.var_bound_c);
            result.runs.push_back({inst_label, variant.label, r, verdict.reduction.pass});
            reduction_pass += verdict.reduction.pass;
            var_pass += verdict.var_bound;
            episodes_pass += verdict.episodes_ok;
            solves_pass += verdict.solves_monotone && verdict.norm_bound;
            worst_c = std::max(worst_c, verdict.smallest_c);
            if (verdict.optimism_violations >= 0) {
                audited = true;
                violating_seeds += verdict.optimism_violations > 0;
            }
            if (config.checkpoints) {
                std::ostringstream cp;
                write_checkpoints_csv(cp, r.checkpoints);
                const std::string name = "i" + std::to_string(cell.instance) + "_" + file_stem(variant.label) +
                                         "_T" + std::to_string(cell.T) + "_seed" + std::to_string(r.seed) + ".csv";
                write_file(config.output_dir / "checkpoints" / name, cp.str());
            }
        }
        result.summaries.push_back({inst_label, variant.label, cell.T, aggregate(cell_records)});

        if (verify) {
            const std::string where = inst_label + " / " + variant.label + " / T=" + std::to_string(cell.T);
            auto add = [&](const std::string& what, long passed, const std::string& extra = "") {
                result.checks.push_back({where + ": " + what, passed == static_cast<long>(n_seeds),
                                         std::to_string(passed) + "/" + std::to_string(n_seeds) + " runs" + extra});
            };
            add("reduction inequality", reduction_pass);
            add("variance bound c=" + format_number(config.var_bound_c), var_pass,
                ", smallest passing c " + format_number(worst_c));
            add("episode count bound", episodes_pass);
            add("monotone iterates and norm bound", solves_pass);
            if (audited) {
                const double delta = variant.delta;
                const auto allowed = static_cast<long>(std::floor(delta * static_cast<double>(n_seeds)));
                result.checks.push_back({where + ": optimism audit", violating_seeds <= allowed,
                                         std::to_string(violating_seeds) + " violating seeds, allowed " +
                                             std::to_string(allowed)});
            }
        }
    }

    std::ostringstream runs_csv;
    write_runs_csv(runs_csv, result.runs);
    write_file(config.output_dir / "runs.csv", runs_csv.str());
    std::ostringstream summary_csv;
    write_summary_csv(summary_csv, result.summaries);
    write_file(config.output_dir / "summary.csv", summary_csv.str());
    log << "wrote " << (config.output_dir / "runs.csv").string() << " and "
        << (config.output_dir / "summary.csv").string() << '\n';
    return result;
}

} // namespace focuslab

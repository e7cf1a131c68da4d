#include "gsi/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "gsi/errors.hpp"
#include "gsi/kernels.hpp"
#include "gsi/svg.hpp"

namespace gsi {

using nlohmann::json;

namespace {

// ---- enum names -----------------------------------------------------------

template <class E>
struct Names;

#define GSI_NAMES(E, ...)                                                                                              \
    template <>                                                                                                        \
    struct Names<E> {                                                                                                  \
        static constexpr std::pair<E, const char*> table[] = {__VA_ARGS__};                                          \
    };

GSI_NAMES(DatasetKind, {DatasetKind::synthetic, "synthetic"}, {DatasetKind::csv, "csv"})
GSI_NAMES(SplitDomain, {SplitDomain::automatic, "auto"}, {SplitDomain::all_entries, "all_entries"},
          {SplitDomain::observed, "observed"})
GSI_NAMES(GroundTruth, {GroundTruth::knn, "knn"}, {GroundTruth::synthetic_full, "synthetic_full"})
GSI_NAMES(GsiPrediction, {GsiPrediction::appended_row, "appended_row"},
          {GsiPrediction::member_mean, "member_mean"})
GSI_NAMES(StartMode, {StartMode::zero_fill, "zero_fill"}, {StartMode::random, "random"})
GSI_NAMES(MeanDivisor, {MeanDivisor::rater_count, "rater_count"}, {MeanDivisor::group_size, "group_size"})
GSI_NAMES(CandidateMode, {CandidateMode::exclude_jointly_observed, "exclude_jointly_observed"},
          {CandidateMode::all_items, "all_items"})
GSI_NAMES(Command, {Command::complete, "complete"}, {Command::group_rec, "group-rec"},
          {Command::rank_table, "rank-table"}, {Command::convergence, "convergence"}, {Command::synth, "synth"})

#undef GSI_NAMES

template <class E>
const char* name_of(E e) {
    for (const auto& [v, n] : Names<E>::table)
        if (v == e) return n;
    return "?";
}

template <class E>
E parse_name(std::string_view s, const std::string& where) {
    std::string choices;
    for (const auto& [v, n] : Names<E>::table) {
        if (s == n) return v;
        choices += choices.empty() ? "" : ", ";
        choices += n;
    }
    throw ConfigError(where + ": unknown value '" + std::string(s) + "' (expected one of: " + choices + ")");
}

// ---- JSON reading ---------------------------------------------------------

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        const bool known =
            std::any_of(allowed.begin(), allowed.end(), [&](const char* k) { return it.key() == k; });
        if (!known) throw ConfigError("unknown config key '" + (where.empty() ? "" : where + ".") + it.key() + "'");
    }
}

std::string key_path(const std::string& where, const char* key) { return where.empty() ? key : where + "." + key; }

const json* find(const json& j, const char* key) {
    auto it = j.find(key);
    return it == j.end() ? nullptr : &*it;
}

void read(const json& j, const char* key, double& out, const std::string& where) {
    if (auto v = find(j, key)) {
        if (!v->is_number()) throw ConfigError(key_path(where, key) + ": expected a number");
        out = v->get<double>();
    }
}

void read(const json& j, const char* key, std::size_t& out, const std::string& where) {
    if (auto v = find(j, key)) {
        if (!v->is_number_unsigned()) throw ConfigError(key_path(where, key) + ": expected a non-negative integer");
        out = v->get<std::size_t>();
    }
}

static_assert(std::is_same_v<std::uint64_t, std::size_t>, "seeds are read through the size_t overload");

void read(const json& j, const char* key, int& out, const std::string& where) {
    if (auto v = find(j, key)) {
        if (!v->is_number_integer()) throw ConfigError(key_path(where, key) + ": expected an integer");
        out = v->get<int>();
    }
}

void read(const json& j, const char* key, bool& out, const std::string& where) {
    if (auto v = find(j, key)) {
        if (!v->is_boolean()) throw ConfigError(key_path(where, key) + ": expected true or false");
        out = v->get<bool>();
    }
}

void read(const json& j, const char* key, std::string& out, const std::string& where) {
    if (auto v = find(j, key)) {
        if (!v->is_string()) throw ConfigError(key_path(where, key) + ": expected a string");
        out = v->get<std::string>();
    }
}

template <class E>
void read_enum(const json& j, const char* key, E& out, const std::string& where) {
    std::string s;
    read(j, key, s, where);
    if (find(j, key)) out = parse_name<E>(s, key_path(where, key));
}

template <class T>
void read_list(const json& j, const char* key, std::vector<T>& out, const std::string& where) {
    auto v = find(j, key);
    if (!v) return;
    if (!v->is_array()) throw ConfigError(key_path(where, key) + ": expected a list");
    out.clear();
    for (std::size_t k = 0; k < v->size(); ++k) {
        json wrapped = {{"item", (*v)[k]}};
        T item{};
        read(wrapped, "item", item, key_path(where, key) + "[" + std::to_string(k) + "]");
        out.push_back(item);
    }
}

char read_delimiter(const json& j, const std::string& where, char fallback) {
    std::string s;
    read(j, "delimiter", s, where);
    if (!find(j, "delimiter")) return fallback;
    if (s == "\\t" || s == "tab") return '\t';
    if (s.size() != 1) throw ConfigError(where + ".delimiter: expected a single character or \"tab\"");
    return s[0];
}

// ---- formatting -----------------------------------------------------------

std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

template <class T>
std::string fmt(const std::optional<T>& v) {
    if (!v) return "";
    if constexpr (std::is_floating_point_v<T>) {
        return fmt(*v);
    } else {
        return std::to_string(*v);
    }
}

std::string fmt(std::size_t v) { return std::to_string(v); }

class Csv {
public:
    explicit Csv(std::initializer_list<const char*> header) {
        for (const char* h : header) cell(h);
        end();
    }
    Csv& cell(const std::string& v) {
        if (!first_) out_ << ',';
        out_ << v;
        first_ = false;
        return *this;
    }
    void end() {
        out_ << '\n';
        first_ = true;
    }
    std::string str() const { return out_.str(); }

private:
    std::ostringstream out_;
    bool first_ = true;
};

struct Artifact {
    std::string name;
    std::string content;
};

void write_atomic(const std::filesystem::path& path, const std::string& content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw DataError("failed while writing " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw DataError("cannot move " + tmp.string() + " into place");
    }
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string method_label(Method m) {
    switch (m) {
    case Method::gsi: return "GSI-SVD";
    case Method::wbf: return "WBF";
    case Method::af: return "AF";
    }
    return "?";
}

} // namespace

// ---- configuration --------------------------------------------------------

void ExperimentConfig::validate() const {
    if (dataset.kind == DatasetKind::synthetic) dataset.synthetic.validate();
    if (dataset.kind == DatasetKind::csv) {
        if (dataset.path.empty()) throw ConfigError("dataset.path is required for csv datasets");
        dataset.schema.validate();
    }
    if (ground_truth == GroundTruth::synthetic_full && dataset.kind != DatasetKind::synthetic)
        throw ConfigError("ground_truth 'synthetic_full' needs a synthetic dataset");
    if (knn_k < 1) throw ConfigError("knn_k must be >= 1");
    if (!(split.fraction > 0.0 && split.fraction < 1.0)) throw ConfigError("split.fraction must lie in (0, 1)");
    softimpute.validate();
    if (als.rank < 1) throw ConfigError("als.rank must be >= 1");
    if (!(als.reg_lambda >= 0.0)) throw ConfigError("als.reg_lambda must be >= 0");
    if (als.max_sweeps < 1) throw ConfigError("als.max_sweeps must be >= 1");
    if (!(als.tolerance > 0.0)) throw ConfigError("als.tolerance must be > 0");
    if (groups.sizes.empty()) throw ConfigError("groups.sizes must not be empty");
    for (auto s : groups.sizes)
        if (s < 1) throw ConfigError("groups.sizes entries must be >= 1");
    if (groups.instances < 1) throw ConfigError("groups.instances must be >= 1");
    if (metrics.k < 1) throw ConfigError("metrics.k must be >= 1");
    if (!std::isfinite(metrics.tau)) throw ConfigError("metrics.tau must be finite");
    for (double l : rank_table.lambdas)
        if (!(l >= 0.0) || !std::isfinite(l)) throw ConfigError("rank_table.lambdas must be finite and >= 0");
    if (rank_table.group_size < 1) throw ConfigError("rank_table.group_size must be >= 1");
    if (convergence.lambda && !(*convergence.lambda >= 0.0)) throw ConfigError("convergence.lambda must be >= 0");
    if (threads < 0) throw ConfigError("threads must be >= 0");
    if (output.empty()) throw ConfigError("output directory must not be empty");
}

ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig c;
    check_keys(j,
               {"dataset", "knn_k", "ground_truth", "split", "softimpute", "als", "methods", "af_aggregation",
                "gsi_prediction", "groups", "metrics", "rank_table", "convergence", "output", "threads"},
               "");

    if (auto d = find(j, "dataset")) {
        const std::string w = "dataset";
        check_keys(*d, {"kind", "name", "synthetic", "path", "format", "schema", "users", "items"}, w);
        read_enum(*d, "kind", c.dataset.kind, w);
        read(*d, "name", c.dataset.name, w);
        std::string path;
        read(*d, "path", path, w);
        c.dataset.path = path;
        read(*d, "format", c.dataset.format, w);
        if (c.dataset.format == "movielens") {
            c.dataset.schema = CsvSchema::movielens_100k();
        } else if (c.dataset.format == "goodbooks") {
            c.dataset.schema = CsvSchema::goodbooks();
        } else if (c.dataset.format != "custom") {
            throw ConfigError("dataset.format: unknown value '" + c.dataset.format +
                              "' (expected one of: movielens, goodbooks, custom)");
        }
        read(*d, "users", c.dataset.users, w);
        read(*d, "items", c.dataset.items, w);
        if (auto s = find(*d, "synthetic")) {
            const std::string ws = "dataset.synthetic";
            check_keys(*s, {"rows", "cols", "mean", "stddev", "observed_fraction", "min_rating", "max_rating", "seed"},
                       ws);
            auto& sc = c.dataset.synthetic;
            read(*s, "rows", sc.rows, ws);
            read(*s, "cols", sc.cols, ws);
            read(*s, "mean", sc.mean, ws);
            read(*s, "stddev", sc.stddev, ws);
            read(*s, "observed_fraction", sc.observed_fraction, ws);
            read(*s, "min_rating", sc.min_rating, ws);
            read(*s, "max_rating", sc.max_rating, ws);
            read(*s, "seed", sc.seed, ws);
        }
        if (auto s = find(*d, "schema")) {
            const std::string ws = "dataset.schema";
            check_keys(*s,
                       {"delimiter", "user_col", "item_col", "rating_col", "timestamp_col", "header", "min_rating",
                        "max_rating"},
                       ws);
            auto& sc = c.dataset.schema;
            sc.delimiter = read_delimiter(*s, ws, sc.delimiter);
            read(*s, "user_col", sc.user_col, ws);
            read(*s, "item_col", sc.item_col, ws);
            read(*s, "rating_col", sc.rating_col, ws);
            if (auto t = find(*s, "timestamp_col")) {
                if (t->is_null()) {
                    sc.timestamp_col.reset();
                } else {
                    std::size_t col = 0;
                    read(*s, "timestamp_col", col, ws);
                    sc.timestamp_col = col;
                }
            }
            read(*s, "header", sc.header, ws);
            read(*s, "min_rating", sc.min_rating, ws);
            read(*s, "max_rating", sc.max_rating, ws);
        }
    }

    read(j, "knn_k", c.knn_k, "");
    read_enum(j, "ground_truth", c.ground_truth, "");

    if (auto s = find(j, "split")) {
        check_keys(*s, {"fraction", "seed", "domain"}, "split");
        read(*s, "fraction", c.split.fraction, "split");
        read(*s, "seed", c.split.seed, "split");
        read_enum(*s, "domain", c.split.domain, "split");
    }
    if (auto s = find(j, "softimpute")) {
        const std::string w = "softimpute";
        check_keys(*s, {"grid_size", "lambda_min", "epsilon", "max_iters", "rank_tolerance", "seed", "init_scale"}, w);
        read(*s, "grid_size", c.softimpute.grid_size, w);
        read(*s, "lambda_min", c.softimpute.lambda_min, w);
        read(*s, "epsilon", c.softimpute.epsilon, w);
        read(*s, "max_iters", c.softimpute.max_iters, w);
        read(*s, "rank_tolerance", c.softimpute.rank_tolerance, w);
        read(*s, "seed", c.softimpute.seed, w);
        read(*s, "init_scale", c.softimpute.init_scale, w);
    }
    if (auto s = find(j, "als")) {
        const std::string w = "als";
        check_keys(*s, {"rank", "reg_lambda", "max_sweeps", "tolerance", "seed"}, w);
        read(*s, "rank", c.als.rank, w);
        read(*s, "reg_lambda", c.als.reg_lambda, w);
        read(*s, "max_sweeps", c.als.max_sweeps, w);
        read(*s, "tolerance", c.als.tolerance, w);
        read(*s, "seed", c.als.seed, w);
    }
    if (find(j, "methods")) {
        std::vector<std::string> names;
        read_list(j, "methods", names, "");
        c.methods.clear();
        for (const auto& n : names) {
            const Method m = parse_method(n);
            if (std::find(c.methods.begin(), c.methods.end(), m) != c.methods.end())
                throw ConfigError("methods: '" + n + "' listed twice");
            c.methods.push_back(m);
        }
    }
    if (auto a = find(j, "af_aggregation")) {
        if (!a->is_string()) throw ConfigError("af_aggregation: expected a string");
        c.af_aggregation = parse_aggregation(a->get<std::string>());
    }
    read_enum(j, "gsi_prediction", c.gsi_prediction, "");

    if (auto g = find(j, "groups")) {
        check_keys(*g, {"sizes", "instances", "seed", "mean_divisor"}, "groups");
        read_list(*g, "sizes", c.groups.sizes, "groups");
        read(*g, "instances", c.groups.instances, "groups");
        read(*g, "seed", c.groups.seed, "groups");
        read_enum(*g, "mean_divisor", c.groups.divisor, "groups");
    }
    if (auto m = find(j, "metrics")) {
        check_keys(*m, {"k", "tau", "candidates"}, "metrics");
        read(*m, "k", c.metrics.k, "metrics");
        read(*m, "tau", c.metrics.tau, "metrics");
        read_enum(*m, "candidates", c.metrics.candidates, "metrics");
    }
    if (auto r = find(j, "rank_table")) {
        check_keys(*r, {"lambdas", "group_size"}, "rank_table");
        read_list(*r, "lambdas", c.rank_table.lambdas, "rank_table");
        read(*r, "group_size", c.rank_table.group_size, "rank_table");
    }
    if (auto v = find(j, "convergence")) {
        check_keys(*v, {"lambda", "start"}, "convergence");
        if (auto l = find(*v, "lambda"); l && !l->is_null()) {
            double lambda = 0.0;
            read(*v, "lambda", lambda, "convergence");
            c.convergence.lambda = lambda;
        }
        read_enum(*v, "start", c.convergence.start, "convergence");
    }
    std::string out = c.output.string();
    read(j, "output", out, "");
    c.output = out;
    read(j, "threads", c.threads, "");
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
    }
    return config_from_json(j);
}

json config_to_json(const ExperimentConfig& c) {
    json j;
    const auto& d = c.dataset;
    json schema = {{"delimiter", std::string(1, d.schema.delimiter)},
                   {"user_col", d.schema.user_col},
                   {"item_col", d.schema.item_col},
                   {"rating_col", d.schema.rating_col},
                   {"timestamp_col", d.schema.timestamp_col ? json(*d.schema.timestamp_col) : json(nullptr)},
                   {"header", d.schema.header},
                   {"min_rating", d.schema.min_rating},
                   {"max_rating", d.schema.max_rating}};
    if (d.schema.delimiter == '\t') schema["delimiter"] = "tab";
    j["dataset"] = {{"kind", name_of(d.kind)},
                    {"name", d.name},
                    {"synthetic",
                     {{"rows", d.synthetic.rows},
                      {"cols", d.synthetic.cols},
                      {"mean", d.synthetic.mean},
                      {"stddev", d.synthetic.stddev},
                      {"observed_fraction", d.synthetic.observed_fraction},
                      {"min_rating", d.synthetic.min_rating},
                      {"max_rating", d.synthetic.max_rating},
                      {"seed", d.synthetic.seed}}},
                    {"path", d.path.string()},
                    {"format", d.format},
                    {"schema", schema},
                    {"users", d.users},
                    {"items", d.items}};
    j["knn_k"] = c.knn_k;
    j["ground_truth"] = name_of(c.ground_truth);
    j["split"] = {{"fraction", c.split.fraction}, {"seed", c.split.seed}, {"domain", name_of(c.split.domain)}};
    j["softimpute"] = {{"grid_size", c.softimpute.grid_size},   {"lambda_min", c.softimpute.lambda_min},
                       {"epsilon", c.softimpute.epsilon},       {"max_iters", c.softimpute.max_iters},
                       {"rank_tolerance", c.softimpute.rank_tolerance}, {"seed", c.softimpute.seed},
                       {"init_scale", c.softimpute.init_scale}};
    j["als"] = {{"rank", c.als.rank},
                {"reg_lambda", c.als.reg_lambda},
                {"max_sweeps", c.als.max_sweeps},
                {"tolerance", c.als.tolerance},
                {"seed", c.als.seed}};
    j["methods"] = json::array();
    for (auto m : c.methods) j["methods"].push_back(std::string(to_string(m)));
    j["af_aggregation"] = std::string(to_string(c.af_aggregation));
    j["gsi_prediction"] = name_of(c.gsi_prediction);
    j["groups"] = {{"sizes", c.groups.sizes},
                   {"instances", c.groups.instances},
                   {"seed", c.groups.seed},
                   {"mean_divisor", name_of(c.groups.divisor)}};
    j["metrics"] = {{"k", c.metrics.k}, {"tau", c.metrics.tau}, {"candidates", name_of(c.metrics.candidates)}};
    j["rank_table"] = {{"lambdas", c.rank_table.lambdas}, {"group_size", c.rank_table.group_size}};
    j["convergence"] = {{"lambda", c.convergence.lambda ? json(*c.convergence.lambda) : json(nullptr)},
                        {"start", name_of(c.convergence.start)}};
    j["output"] = c.output.string();
    j["threads"] = c.threads;
    return j;
}

void apply_override(json& j, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' must look like key=value");
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(text);
    } catch (const json::exception&) {
        value = text;
    }
    json* node = &j;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw ConfigError("override '" + assignment + "': empty key segment");
        if (!node->is_object()) *node = json::object();
        if (dot == std::string::npos) {
            (*node)[part] = value;
            return;
        }
        node = &(*node)[part];
        start = dot + 1;
    }
}

void apply_seed(ExperimentConfig& c, std::uint64_t seed) {
    c.dataset.synthetic.seed = seed;
    c.split.seed = seed + 1;
    c.groups.seed = seed + 2;
    c.softimpute.seed = seed + 3;
    c.als.seed = seed + 4;
}

// ---- data -----------------------------------------------------------------

PreparedData prepare_data(const ExperimentConfig& c) {
    c.validate();
    PreparedData p;
    json diag;
    std::optional<Matrix> full;

    if (c.dataset.kind == DatasetKind::synthetic) {
        auto syn = generate_synthetic(c.dataset.synthetic);
        p.name = c.dataset.name.empty() ? "synthetic" : c.dataset.name;
        p.observed = std::move(syn.observed);
        full = std::move(syn.full);
    } else {
        const auto table = load_ratings_csv(c.dataset.path, c.dataset.schema);
        diag["ingest"] = {{"records", table.records.size()},
                          {"users", table.users.size()},
                          {"items", table.items.size()},
                          {"rejected", table.rejected},
                          {"malformed", table.malformed},
                          {"duplicates", table.duplicates}};
        const std::size_t m = c.dataset.users ? c.dataset.users : table.users.size();
        const std::size_t n = c.dataset.items ? c.dataset.items : table.items.size();
        auto sub = subsample(table, m, n);
        diag["subsample_warnings"] = sub.warnings;
        p.name = c.dataset.name.empty() ? c.dataset.path.stem().string() : c.dataset.name;
        p.observed = std::move(sub.matrix);
    }

    const std::size_t rows = p.observed.rows();
    const std::size_t cols = p.observed.cols();
    p.truth = c.ground_truth == GroundTruth::synthetic_full ? *full : knn_impute(p.observed, c.knn_k);

    SplitDomain domain = c.split.domain;
    if (domain == SplitDomain::automatic)
        domain = c.dataset.kind == DatasetKind::synthetic ? SplitDomain::all_entries : SplitDomain::observed;
    const ObservedSet pool = domain == SplitDomain::all_entries ? ObservedSet::all(rows, cols) : p.observed.observed();
    if (pool.count() < 2) throw DataError("dataset has fewer than two entries to split");
    p.split = train_test_split(pool, c.split.fraction, c.split.seed);
    p.train = RatingMatrix(p.truth, p.split.train);

    const double cells = static_cast<double>(rows) * static_cast<double>(cols);
    diag["rows"] = rows;
    diag["cols"] = cols;
    diag["observed"] = p.observed.observed().count();
    diag["sparsity"] = 1.0 - static_cast<double>(p.observed.observed().count()) / cells;
    diag["split_domain"] = name_of(domain);
    diag["train_entries"] = p.split.train.count();
    diag["test_entries"] = p.split.test.count();
    p.diagnostics = std::move(diag);
    return p;
}

std::vector<Group> form_groups(std::size_t users, std::size_t size, std::size_t count, std::uint64_t seed) {
    if (size < 1 || size > users) {
        std::ostringstream msg;
        msg << "group size " << size << " must lie in [1, " << users << "]";
        throw ConfigError(msg.str());
    }
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(size)};
    std::mt19937_64 rng(seq);
    std::vector<std::size_t> perm(users);
    std::size_t pos = users;
    std::vector<Group> groups;
    for (std::size_t q = 0; q < count; ++q) {
        if (pos + size > users) {
            std::iota(perm.begin(), perm.end(), std::size_t{0});
            for (std::size_t k = users; k > 1; --k) {
                std::uniform_int_distribution<std::size_t> pick(0, k - 1);
                std::swap(perm[k - 1], perm[pick(rng)]);
            }
            pos = 0;
        }
        Group g;
        g.id = "s" + std::to_string(size) + "-g" + std::to_string(q);
        g.members.assign(perm.begin() + static_cast<std::ptrdiff_t>(pos),
                         perm.begin() + static_cast<std::ptrdiff_t>(pos + size));
        std::sort(g.members.begin(), g.members.end());
        pos += size;
        groups.push_back(std::move(g));
    }
    return groups;
}

// ---- commands -------------------------------------------------------------

CompletionRun run_complete(const ExperimentConfig& c, const PreparedData& data) {
    const auto grid = lambda_grid(data.train, c.softimpute);
    const Matrix start = random_start(data.train.rows(), data.train.cols(), c.softimpute);
    const Matrix* init = &start;

    SoftImputePath path;
    std::vector<CompletionPoint> failed;
    for (double lambda : grid) {
        try {
            auto r = soft_impute(data.train, lambda, *init, c.softimpute);
            path.lambdas.push_back(lambda);
            path.solutions.push_back(std::move(r.solution));
            path.traces.push_back(std::move(r.trace));
            init = &path.solutions.back().z;
        } catch (const NumericalError& e) {
            CompletionPoint p;
            p.report.lambda = lambda;
            p.report.nuclear_norm = std::nan("");
            p.status = std::string("numerical_failure: ") + e.what();
            failed.push_back(std::move(p));
        }
    }

    CompletionRun run;
    run.dataset = data.name;
    for (auto& report : error_curve(path, data.truth, data.split)) {
        const auto k = static_cast<std::size_t>(
            std::find(path.lambdas.begin(), path.lambdas.end(), report.lambda) - path.lambdas.begin());
        CompletionPoint p;
        p.report = report;
        p.iterations = path.traces[k].iterations;
        p.converged = path.traces[k].converged;
        p.estimated_rho = path.traces[k].estimated_rho;
        run.points.push_back(std::move(p));
    }
    for (auto& p : failed) run.points.push_back(std::move(p));
    return run;
}

std::vector<GroupRecSummary> summarize(const std::vector<GroupRecRow>& rows, const std::vector<Method>& methods) {
    std::vector<std::size_t> sizes;
    for (const auto& r : rows)
        if (std::find(sizes.begin(), sizes.end(), r.group_size) == sizes.end()) sizes.push_back(r.group_size);

    auto reduce = [&](Method m, std::optional<std::size_t> size) {
        GroupRecSummary s;
        s.method = m;
        s.group_size = size;
        double recall_sum = 0.0;
        std::size_t recall_count = 0;
        for (const auto& r : rows) {
            if (r.method != m || !r.metrics || (size && r.group_size != *size)) continue;
            ++s.instances;
            s.precision += r.metrics->precision;
            s.f1 += r.metrics->f1;
            if (r.metrics->recall) {
                recall_sum += *r.metrics->recall;
                ++recall_count;
            }
        }
        if (s.instances > 0) {
            s.precision /= static_cast<double>(s.instances);
            s.f1 /= static_cast<double>(s.instances);
        }
        if (recall_count > 0) s.recall = recall_sum / static_cast<double>(recall_count);
        return s;
    };

    std::vector<GroupRecSummary> out;
    for (auto m : methods) {
        for (auto size : sizes) out.push_back(reduce(m, size));
        out.push_back(reduce(m, std::nullopt));
    }
    return out;
}

GroupRecRun run_group_rec(const ExperimentConfig& c, const PreparedData& data) {
    if (c.methods.empty()) throw ConfigError("methods must not be empty");
    const RatingMatrix& train = data.train;
    const bool any_als = std::any_of(c.methods.begin(), c.methods.end(), [](Method m) { return m != Method::gsi; });
    if (any_als) c.als.validate(train.rows(), train.cols());

    std::vector<std::vector<Group>> batches;
    for (auto size : c.groups.sizes) batches.push_back(form_groups(train.rows(), size, c.groups.instances, c.groups.seed));

    std::optional<AlsResult> shared;
    if (std::find(c.methods.begin(), c.methods.end(), Method::af) != c.methods.end()) {
        try {
            shared = als_fit(train, c.als);
        } catch (const NumericalError&) {
        }
    }

    GroupRecRun run;
    run.dataset = data.name;
    for (const auto& batch : batches) {
        for (const auto& g : batch) {
            const auto reference = group_reference(data.truth, g);
            const auto candidates = candidate_items(data.split.train, g, c.metrics.candidates);
            for (auto method : c.methods) {
                GroupRecRow row;
                row.method = method;
                row.group_id = g.id;
                row.group_size = g.size();
                row.lambda = c.als.reg_lambda;
                std::vector<double> predicted;
                try {
                    switch (method) {
                    case Method::gsi: {
                        auto r = gsi_svd(train, g, c.softimpute, c.groups.divisor);
                        row.lambda = r.path.lambdas[r.selected];
                        predicted = c.gsi_prediction == GsiPrediction::appended_row
                                        ? std::move(r.group_ratings)
                                        : group_prediction_aggregate(r.completed, g);
                        break;
                    }
                    case Method::wbf:
                        predicted = wbf(train, g, aggregate_group(train, g, c.groups.divisor), c.als).ratings;
                        break;
                    case Method::af:
                        if (!shared) throw NumericalError("shared factorization failed");
                        predicted = af_from_factors(shared->factors, train, g, c.af_aggregation);
                        break;
                    }
                } catch (const NumericalError&) {
                    run.rows.push_back(std::move(row));
                    continue;
                }
                auto m = precision_recall_f1(reference, predicted, c.metrics.k, c.metrics.tau, candidates);
                m.group_id = g.id;
                m.method = std::string(to_string(method));
                row.metrics = std::move(m);
                run.rows.push_back(std::move(row));
            }
        }
    }
    run.summary = summarize(run.rows, c.methods);
    return run;
}

RankTable run_rank_table(const ExperimentConfig& c, const PreparedData& data) {
    if (c.methods.empty()) throw ConfigError("methods must not be empty");
    if (c.rank_table.lambdas.empty()) throw ConfigError("rank_table.lambdas must not be empty");
    const auto group = form_groups(data.train.rows(), c.rank_table.group_size, 1, c.groups.seed).front();
    const std::vector<RankDataset> datasets{{data.name, data.train, group}};
    RankExperimentConfig rc;
    rc.softimpute = c.softimpute;
    rc.als = c.als;
    rc.af_kind = c.af_aggregation;
    rc.divisor = c.groups.divisor;
    if (std::any_of(c.methods.begin(), c.methods.end(), [](Method m) { return m != Method::gsi; }))
        c.als.validate(data.train.rows(), data.train.cols());
    return rank_recovery_experiment(datasets, c.methods, c.rank_table.lambdas, rc);
}

ConvergenceRun run_convergence(const ExperimentConfig& c, const PreparedData& data) {
    ConvergenceRun run;
    run.dataset = data.name;
    run.epsilon = c.softimpute.epsilon;
    if (c.convergence.lambda) {
        run.lambda = *c.convergence.lambda;
    } else {
        const auto grid = lambda_grid(data.train, c.softimpute);
        run.lambda = std::sqrt(grid.front() * grid.back());
    }
    const Matrix z0 = c.convergence.start == StartMode::zero_fill
                          ? project_observed(data.train)
                          : random_start(data.train.rows(), data.train.cols(), c.softimpute);
    auto r = soft_impute(data.train, run.lambda, z0, c.softimpute);
    run.trace = std::move(r.trace);
    run.rank = r.solution.rank;
    run.series = convergence_series(run.trace);
    if (run.series.points.size() >= 2) {
        std::vector<double> xs, ys;
        for (const auto& [k, v] : run.series.points) {
            xs.push_back(static_cast<double>(k));
            ys.push_back(v);
        }
        run.fit = fit_line(xs, ys);
    }
    return run;
}

Command parse_command(std::string_view name) { return parse_name<Command>(name, "command"); }
std::string_view to_string(Command c) { return name_of(c); }

// ---- artifacts ------------------------------------------------------------

namespace {

std::vector<Artifact> complete_artifacts(const CompletionRun& run, bool svg) {
    Csv csv{"dataset", "lambda", "nuclear_norm", "rank", "train_mse", "test_mse", "iterations", "converged",
            "estimated_rho", "status"};
    for (const auto& p : run.points) {
        const bool ok = p.status == "ok";
        csv.cell(run.dataset)
            .cell(fmt(p.report.lambda))
            .cell(ok ? fmt(p.report.nuclear_norm) : "")
            .cell(ok ? fmt(p.report.rank) : "")
            .cell(ok ? fmt(p.report.train_mse) : "")
            .cell(ok ? fmt(p.report.test_mse) : "")
            .cell(ok ? fmt(p.iterations) : "")
            .cell(ok ? (p.converged ? "true" : "false") : "")
            .cell(fmt(p.estimated_rho))
            .cell(p.status);
        csv.end();
    }
    std::vector<Artifact> out{{"error_curve.csv", csv.str()}};
    if (svg) {
        LineChart chart{"Training and test error vs nuclear norm (" + run.dataset + ")", "nuclear norm", "MSE", {}};
        ChartSeries train{"train", {}}, test{"test", {}};
        for (const auto& p : run.points) {
            if (p.status != "ok") continue;
            train.points.emplace_back(p.report.nuclear_norm, p.report.train_mse);
            if (p.report.test_mse) test.points.emplace_back(p.report.nuclear_norm, *p.report.test_mse);
        }
        chart.series = {train, test};
        out.push_back({"error_curve.svg", render_svg(chart)});
    }
    return out;
}

std::vector<Artifact> group_rec_artifacts(const GroupRecRun& run, const ExperimentConfig& c, bool svg) {
    Csv csv{"dataset", "method", "group_id", "group_size", "k", "tau", "lambda", "precision", "recall", "f1",
            "tp", "fp", "fn", "seed"};
    for (const auto& r : run.rows) {
        csv.cell(run.dataset).cell(std::string(to_string(r.method))).cell(r.group_id).cell(fmt(r.group_size));
        csv.cell(fmt(c.metrics.k)).cell(fmt(c.metrics.tau)).cell(fmt(r.lambda));
        if (r.metrics) {
            const auto& m = *r.metrics;
            csv.cell(fmt(m.precision)).cell(fmt(m.recall)).cell(fmt(m.f1));
            csv.cell(fmt(m.tp)).cell(fmt(m.fp)).cell(fmt(m.fn));
        } else {
            for (int k = 0; k < 6; ++k) csv.cell("");
        }
        csv.cell(std::to_string(c.groups.seed));
        csv.end();
    }
    Csv summary{"dataset", "method", "group_size", "instances", "precision", "recall", "f1"};
    for (const auto& s : run.summary) {
        summary.cell(run.dataset).cell(std::string(to_string(s.method)));
        summary.cell(s.group_size ? fmt(*s.group_size) : "all").cell(fmt(s.instances));
        summary.cell(fmt(s.precision)).cell(fmt(s.recall)).cell(fmt(s.f1));
        summary.end();
    }
    std::vector<Artifact> out{{"metrics.csv", csv.str()}, {"summary.csv", summary.str()}};
    if (svg) {
        for (const auto& [file, label] : {std::pair{"f1_by_group_size.svg", "F1"},
                                          std::pair{"precision_by_group_size.svg", "precision"},
                                          std::pair{"recall_by_group_size.svg", "recall"}}) {
            LineChart chart{std::string(label) + "@" + std::to_string(c.metrics.k) + " by group size (" + run.dataset +
                                ")",
                            "group size", label, {}};
            for (auto m : c.methods) {
                ChartSeries series{method_label(m), {}};
                for (const auto& s : run.summary) {
                    if (s.method != m || !s.group_size || s.instances == 0) continue;
                    const std::string l = label;
                    const double v = l == "F1" ? s.f1 : l == "precision" ? s.precision : s.recall.value_or(std::nan(""));
                    series.points.emplace_back(static_cast<double>(*s.group_size), v);
                }
                chart.series.push_back(std::move(series));
            }
            out.push_back({file, render_svg(chart)});
        }
    }
    return out;
}

std::vector<Artifact> rank_artifacts(const RankTable& table, const std::vector<Method>& methods, bool svg) {
    Csv csv{"dataset", "method", "lambda", "rank", "factor_rank"};
    for (const auto& cell : table.cells) {
        csv.cell(cell.dataset).cell(std::string(to_string(cell.method))).cell(fmt(cell.lambda));
        csv.cell(fmt(cell.rank)).cell(cell.method == Method::gsi ? "" : fmt(cell.factor_rank));
        csv.end();
    }
    std::vector<Artifact> out{{"rank_table.csv", csv.str()}};
    if (svg) {
        LineChart chart{"Recovered rank vs regularization", "log10 lambda", "rank", {}};
        for (auto m : methods) {
            ChartSeries series{method_label(m), {}};
            for (const auto& cell : table.cells)
                if (cell.method == m && cell.rank && cell.lambda > 0.0)
                    series.points.emplace_back(std::log10(cell.lambda), static_cast<double>(*cell.rank));
            chart.series.push_back(std::move(series));
        }
        out.push_back({"rank_table.svg", render_svg(chart)});
    }
    return out;
}

std::vector<Artifact> convergence_artifacts(const ConvergenceRun& run, const ExperimentConfig& c, bool svg) {
    Csv series{"iteration", "relative_error", "log10_relative_error"};
    for (std::size_t k = 0; k < run.trace.relative_errors.size(); ++k) {
        const double e = run.trace.relative_errors[k];
        series.cell(fmt(k)).cell(fmt(e)).cell(e > 0.0 ? fmt(std::log10(e)) : "");
        series.end();
    }
    Csv summary{"dataset", "lambda", "epsilon", "start", "iterations", "converged", "rank", "slope", "intercept",
                "r_squared", "estimated_rho", "zero_errors"};
    summary.cell(run.dataset).cell(fmt(run.lambda)).cell(fmt(run.epsilon)).cell(name_of(c.convergence.start));
    summary.cell(fmt(run.trace.iterations)).cell(run.trace.converged ? "true" : "false").cell(fmt(run.rank));
    if (run.fit) {
        summary.cell(fmt(run.fit->slope)).cell(fmt(run.fit->intercept)).cell(fmt(run.fit->r_squared));
    } else {
        summary.cell("").cell("").cell("");
    }
    summary.cell(fmt(run.trace.estimated_rho)).cell(fmt(run.series.zero_errors));
    summary.end();
    std::vector<Artifact> out{{"convergence.csv", series.str()}, {"convergence_summary.csv", summary.str()}};
    if (svg) {
        LineChart chart{"Relative error per iteration (" + run.dataset + ")", "iteration", "log10 relative error", {}};
        ChartSeries s{"lambda = " + fmt(run.lambda), {}};
        for (const auto& [k, v] : run.series.points) s.points.emplace_back(static_cast<double>(k), v);
        chart.series.push_back(std::move(s));
        out.push_back({"convergence.svg", render_svg(chart)});
    }
    return out;
}

} // namespace

std::vector<std::filesystem::path> execute(Command command, const ExperimentConfig& c, const RunOptions& options) {
    const auto t_start = std::chrono::steady_clock::now();
    c.validate();
    if (c.threads > 0) kernels::set_threads(c.threads);

    json stages = json::object();
    json diagnostics = json::object();
    std::vector<Artifact> artifacts;

    if (command == Command::synth) {
        if (c.dataset.kind != DatasetKind::synthetic) throw ConfigError("synth needs a synthetic dataset");
        auto t = std::chrono::steady_clock::now();
        const auto syn = generate_synthetic(c.dataset.synthetic);
        std::ostringstream snap;
        write_snapshot(snap, syn.observed);
        artifacts.push_back({"synthetic.gsim", snap.str()});
        diagnostics["rows"] = syn.observed.rows();
        diagnostics["cols"] = syn.observed.cols();
        diagnostics["observed"] = syn.observed.observed().count();
        stages["generate"] = seconds_since(t);
    } else {
        auto t = std::chrono::steady_clock::now();
        const auto data = prepare_data(c);
        stages["prepare"] = seconds_since(t);
        diagnostics["data"] = data.diagnostics;

        t = std::chrono::steady_clock::now();
        switch (command) {
        case Command::complete: {
            const auto run = run_complete(c, data);
            std::size_t failures = 0, unconverged = 0, iterations = 0;
            for (const auto& p : run.points) {
                failures += p.status != "ok";
                unconverged += p.status == "ok" && !p.converged;
                iterations += p.iterations;
            }
            diagnostics["softimpute"] = {{"grid_points", run.points.size()},
                                         {"numerical_failures", failures},
                                         {"unconverged_points", unconverged},
                                         {"total_iterations", iterations}};
            artifacts = complete_artifacts(run, options.emit_svg);
            break;
        }
        case Command::group_rec: {
            const auto run = run_group_rec(c, data);
            std::size_t failures = 0;
            for (const auto& r : run.rows) failures += !r.metrics;
            diagnostics["group_rec"] = {{"rows", run.rows.size()}, {"numerical_failures", failures}};
            artifacts = group_rec_artifacts(run, c, options.emit_svg);
            break;
        }
        case Command::rank_table: {
            const auto table = run_rank_table(c, data);
            std::size_t failures = 0;
            for (const auto& cell : table.cells) failures += !cell.rank;
            diagnostics["rank_table"] = {{"cells", table.cells.size()}, {"failed_cells", failures}};
            artifacts = rank_artifacts(table, c.methods, options.emit_svg);
            break;
        }
        case Command::convergence: {
            const auto run = run_convergence(c, data);
            diagnostics["convergence"] = {{"lambda", run.lambda},
                                          {"iterations", run.trace.iterations},
                                          {"converged", run.trace.converged}};
            artifacts = convergence_artifacts(run, c, options.emit_svg);
            break;
        }
        case Command::synth: break;
        }
        stages["run"] = seconds_since(t);
    }

    std::filesystem::create_directories(c.output);
    std::vector<std::filesystem::path> written;
    for (const auto& a : artifacts) {
        const auto path = c.output / a.name;
        write_atomic(path, a.content);
        written.push_back(path);
    }
    stages["total"] = seconds_since(t_start);

    json manifest;
    manifest["tool"] = "gsi";
    manifest["version"] = kToolVersion;
    manifest["command"] = std::string(to_string(command));
    manifest["config"] = config_to_json(c);
    manifest["threads"] = kernels::max_threads();
    manifest["stages_seconds"] = stages;
    manifest["diagnostics"] = diagnostics;
    manifest["outputs"] = json::array();
    for (const auto& a : artifacts) manifest["outputs"].push_back(a.name);
    const auto manifest_path = c.output / "manifest.json";
    write_atomic(manifest_path, manifest.dump(2) + "\n");
    written.push_back(manifest_path);
    return written;
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e)) return 2;
    if (dynamic_cast<const DataError*>(&e)) return 3;
    if (dynamic_cast<const NumericalError*>(&e)) return 4;
    if (dynamic_cast<const InsufficientDataError*>(&e)) return 4;
    if (dynamic_cast<const std::filesystem::filesystem_error*>(&e)) return 3;
    return 1;
}

} // namespace gsi

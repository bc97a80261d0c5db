// Experiment runner: data generation, MI estimation, debiased training,
// report aggregation, and hyperparameter sweeps.
//
// Exit codes: 0 success, 1 user error (bad flags, config, files),
// 2 numerical failure during computation.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "cobias/config.hpp"
#include "cobias/debias.hpp"
#include "cobias/fairmetrics.hpp"
#include "cobias/info.hpp"
#include "cobias/mine.hpp"
#include "cobias/model.hpp"
#include "cobias/synthdata.hpp"
#include "cobias/textio.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cobias;

namespace {

// Thrown during the load/validate phase; everything else that escapes the
// compute phase is treated as a numerical failure.
struct UserError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::optional<std::uint64_t> env_seed() {
    const char* v = std::getenv("COBIAS_SEED");
    if (v == nullptr || *v == '\0') return std::nullopt;
    try {
        std::size_t pos = 0;
        std::uint64_t s = std::stoull(v, &pos);
        if (pos != std::string(v).size()) throw std::invalid_argument("trailing");
        return s;
    } catch (const std::exception&) {
        throw UserError(std::string("COBIAS_SEED is not an unsigned integer: '") + v + "'");
    }
}

std::vector<std::uint64_t> parse_seed_list(const std::string& s) {
    std::vector<std::uint64_t> out;
    for (const auto& part : split(s, ',')) {
        try {
            out.push_back(std::stoull(part));
        } catch (const std::exception&) {
            throw UserError("bad seed '" + part + "' in list '" + s + "'");
        }
    }
    if (out.empty()) throw UserError("empty seed list");
    return out;
}

std::vector<double> parse_double_list(const std::string& s) {
    std::vector<double> out;
    for (const auto& part : split(s, ',')) out.push_back(parse_double(part, "value list"));
    if (out.empty()) throw UserError("empty value list");
    return out;
}

std::vector<std::size_t> parse_hidden(const std::string& s) {
    std::vector<std::size_t> out;
    for (const auto& part : split(s, ',')) {
        long long v = parse_int(part, "hidden layer width");
        if (v <= 0) throw UserError("hidden layer width must be positive: " + part);
        out.push_back(static_cast<std::size_t>(v));
    }
    return out;
}

std::string canonical_method(const std::string& m) {
    if (m == "erm") return "erm";
    if (m == "noise" || m == "label_noise") return "noise";
    if (m == "regularizer" || m == "reg") return "regularizer";
    if (m == "dro" || m == "group_dro") return "dro";
    throw UserError("unknown method '" + m + "' (expected erm|noise|regularizer|dro)");
}

SpuriousSpec spec_from_config(const Config& c) {
    SpuriousSpec s;
    s.n = static_cast<std::size_t>(c.get_int("data.n", static_cast<int>(s.n)));
    s.A = static_cast<std::size_t>(c.get_int("data.A", static_cast<int>(s.A)));
    s.B = static_cast<std::size_t>(c.get_int("data.B", static_cast<int>(s.B)));
    s.corr = c.get_double("data.corr", s.corr);
    s.d_core = static_cast<std::size_t>(c.get_int("data.d_core", static_cast<int>(s.d_core)));
    s.d_bias = static_cast<std::size_t>(c.get_int("data.d_bias", static_cast<int>(s.d_bias)));
    s.d_noise = static_cast<std::size_t>(c.get_int("data.d_noise", static_cast<int>(s.d_noise)));
    s.signal_sep = c.get_double("data.signal_sep", s.signal_sep);
    s.noise_sigma = c.get_double("data.noise_sigma", s.noise_sigma);
    s.seed = c.get_u64("data.seed", s.seed);
    if (c.has("data.shift_corr") || c.has("data.shift_signal_sep")) {
        ShiftSpec sh;
        sh.corr = c.get_double("data.shift_corr", s.corr);
        sh.signal_sep = c.get_double("data.shift_signal_sep", s.signal_sep);
        s.shift = sh;
    }
    return s;
}

EstimatorConfig estimator_from_config(const Config& c, const std::string& prefix) {
    EstimatorConfig e;
    e.epochs = c.get_int(prefix + ".epochs", e.epochs);
    e.batch = c.get_int(prefix + ".batch", e.batch);
    e.lr = c.get_double(prefix + ".lr", e.lr);
    if (c.has(prefix + ".hidden")) e.hidden = parse_hidden(c.get_str(prefix + ".hidden"));
    e.soft_clip = c.get_double(prefix + ".soft_clip", e.soft_clip);
    e.final_avg_epochs = c.get_int(prefix + ".final_avg_epochs", e.final_avg_epochs);
    e.ma_correction = c.get_bool(prefix + ".ma_correction", e.ma_correction);
    e.ma_decay = c.get_double(prefix + ".ma_decay", e.ma_decay);
    e.diverge_abs = c.get_double(prefix + ".diverge_abs", e.diverge_abs);
    return e;
}

// Base values from [train]; per-method overrides from [train.<method>].
TrainConfig train_from_config(const Config& c, const std::string& method) {
    TrainConfig t;
    auto get_i = [&](const std::string& k, int d) {
        return c.get_int("train." + method + "." + k, c.get_int("train." + k, d));
    };
    auto get_d = [&](const std::string& k, double d) {
        return c.get_double("train." + method + "." + k, c.get_double("train." + k, d));
    };
    auto get_b = [&](const std::string& k, bool d) {
        return c.get_bool("train." + method + "." + k, c.get_bool("train." + k, d));
    };
    t.epochs = get_i("epochs", t.epochs);
    t.batch = get_i("batch", t.batch);
    t.lr = get_d("lr", t.lr);
    t.weight_decay = get_d("weight_decay", t.weight_decay);
    t.beta = get_d("beta", t.beta);
    t.rho = get_d("rho", t.rho);
    t.dro_eta = get_d("dro_eta", t.dro_eta);
    t.resample = get_b("resample", t.resample);
    t.per_step_alternation = get_b("per_step_alternation", t.per_step_alternation);
    t.cold_start_critic = get_b("cold_start_critic", t.cold_start_critic);
    t.feature_dim =
        static_cast<std::size_t>(get_i("feature_dim", static_cast<int>(t.feature_dim)));
    std::string hidden_key = c.has("train." + method + ".hidden") ? "train." + method + ".hidden"
                             : c.has("train.hidden")              ? "train.hidden"
                                                                  : "";
    if (!hidden_key.empty()) t.hidden = parse_hidden(c.get_str(hidden_key));
    t.critic = estimator_from_config(c, "critic");
    return t;
}

ReportConfig report_from_config(const Config& c) {
    ReportConfig r;
    r.estimator = estimator_from_config(c, "estimator");
    r.with_cobias = c.get_bool("report.with_cobias", true);
    r.rho = c.get_double("report.rho", 0.0);
    return r;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
    f << content;
    if (!f) throw std::runtime_error("write failed for " + path.string());
}

json read_json_file(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw UserError("cannot open " + path.string());
    json j;
    try {
        f >> j;
    } catch (const std::exception& e) {
        throw UserError(path.string() + ": " + e.what());
    }
    return j;
}

// One training run: train, persist trainlog + checkpoint + report.
void run_single(const std::string& method, std::uint64_t seed, const DatasetPair& pair,
                TrainConfig tcfg, ReportConfig rcfg, const fs::path& dir) {
    fs::create_directories(dir);
    tcfg.seed = seed;
    rcfg.seed = seed;
    BiasModel m = make_model(pair.train.X.cols(), pair.train.A, tcfg);
    TrainLog log;
    if (method == "erm") {
        log = train_erm(m, pair.train, tcfg);
    } else if (method == "noise") {
        log = train_label_noise(m, pair.train, tcfg);
    } else if (method == "regularizer") {
        StatisticsNetwork critic = make_training_critic(m, pair.train, tcfg);
        log = train_with_regularizer(m, critic, pair.train, tcfg);
    } else if (method == "dro") {
        log = train_group_dro(m, pair.train, tcfg);
    } else {
        throw UserError("unknown method " + method);
    }
    log.save_csv((dir / "trainlog.csv").string());
    m.save((dir / "model.ckpt").string());
    GroupReport rep = full_report(m, pair.test, rcfg);
    json j = json::parse(rep.to_json());
    j["run"] = {{"method", method}, {"seed", seed}};
    write_file(dir / "report.json", j.dump(2) + "\n");
    write_file(dir / "report.csv",
               GroupReport::csv_header() + "\n" + rep.to_csv_row() + "\n");
}

void run_jobs(std::vector<std::function<void()>>& jobs, int njobs) {
    if (njobs < 1) throw UserError("--jobs must be >= 1");
    if (njobs == 1) {
        for (auto& j : jobs) j();
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex mtx;
    std::vector<std::string> errors;
    auto worker = [&]() {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= jobs.size()) return;
            try {
                jobs[i]();
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lk(mtx);
                errors.emplace_back(e.what());
            }
        }
    };
    std::vector<std::thread> pool;
    int n = std::min<int>(njobs, static_cast<int>(jobs.size()));
    pool.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (!errors.empty()) {
        std::string msg = "job failures:";
        for (const auto& e : errors) msg += "\n  " + e;
        throw std::runtime_error(msg);
    }
}

// --- aggregation -----------------------------------------------------------

struct Summary {
    double mean = 0.0, stdev = 0.0, median = 0.0;
    std::size_t n = 0;
};

Summary summarize(std::vector<double> v) {
    Summary s;
    s.n = v.size();
    if (v.empty()) return s;
    double sum = 0.0;
    for (double x : v) sum += x;
    s.mean = sum / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.stdev = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    std::sort(v.begin(), v.end());
    std::size_t mid = v.size() / 2;
    s.median = v.size() % 2 == 1 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
    return s;
}

const std::vector<std::string> kReportMetrics = {
    "cobias", "unbiased_acc", "worst_group_acc", "BA", "EO", "DI", "average_acc"};

double metric_from_report(const json& j, const std::string& metric, bool& ok) {
    ok = false;
    if (!j.contains(metric) || j[metric].is_null() || !j[metric].is_number()) return 0.0;
    ok = true;
    return j[metric].get<double>();
}

// group label -> metric -> summary, with labels kept in first-seen order
struct Aggregate {
    std::vector<std::string> labels;
    std::map<std::string, std::map<std::string, Summary>> table;
};

Aggregate aggregate_reports(const std::vector<std::pair<std::string, json>>& rows) {
    Aggregate agg;
    std::map<std::string, std::map<std::string, std::vector<double>>> acc;
    for (const auto& [label, j] : rows) {
        if (!acc.count(label)) agg.labels.push_back(label);
        for (const auto& m : kReportMetrics) {
            bool ok = false;
            double v = metric_from_report(j, m, ok);
            if (ok) acc[label][m].push_back(v);
        }
    }
    for (const auto& [label, metrics] : acc)
        for (const auto& [m, vals] : metrics) agg.table[label][m] = summarize(vals);
    return agg;
}

std::string fmt_cell(const Summary& s) {
    if (s.n == 0) return "-";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f +/- %.4f", s.mean, s.stdev);
    return buf;
}

std::string aligned_table(const Aggregate& agg, const std::string& label_header) {
    std::vector<std::vector<std::string>> cells;
    std::vector<std::string> head{label_header};
    for (const auto& m : kReportMetrics) head.push_back(m);
    cells.push_back(head);
    for (const auto& label : agg.labels) {
        std::vector<std::string> row{label};
        for (const auto& m : kReportMetrics) {
            auto it = agg.table.at(label).find(m);
            row.push_back(it == agg.table.at(label).end() ? "-" : fmt_cell(it->second));
        }
        cells.push_back(row);
    }
    std::vector<std::size_t> width(head.size(), 0);
    for (const auto& row : cells)
        for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
    std::string out;
    for (const auto& row : cells) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            out += row[c];
            if (c + 1 < row.size()) out += std::string(width[c] - row[c].size() + 2, ' ');
        }
        out += '\n';
    }
    return out;
}

std::string csv_table(const Aggregate& agg, const std::string& label_header) {
    std::string out = label_header + ",metric,mean,stdev,median,n\n";
    for (const auto& label : agg.labels)
        for (const auto& m : kReportMetrics) {
            auto it = agg.table.at(label).find(m);
            if (it == agg.table.at(label).end()) continue;
            const Summary& s = it->second;
            out += label + "," + m + "," + fmt_g17(s.mean) + "," + fmt_g17(s.stdev) + "," +
                   fmt_g17(s.median) + "," + std::to_string(s.n) + "\n";
        }
    return out;
}

json json_table(const Aggregate& agg) {
    json out = json::object();
    for (const auto& label : agg.labels) {
        json row = json::object();
        for (const auto& [m, s] : agg.table.at(label))
            row[m] = {{"mean", s.mean}, {"stdev", s.stdev}, {"median", s.median}, {"n", s.n}};
        out[label] = row;
    }
    return out;
}

// --- column extraction for estimate-mi --------------------------------------

std::vector<double> column_values(const LabeledDataset& ds, const std::string& name) {
    if (name == "y") {
        std::vector<double> v(ds.n());
        for (std::size_t i = 0; i < ds.n(); ++i) v[i] = ds.Y[i];
        return v;
    }
    if (name == "z") {
        std::vector<double> v(ds.n());
        for (std::size_t i = 0; i < ds.n(); ++i) v[i] = ds.Z[i];
        return v;
    }
    if (name.size() > 1 && name[0] == 'x') {
        long long c = parse_int(name.substr(1), "column index");
        if (c < 0 || static_cast<std::size_t>(c) >= ds.X.cols())
            throw UserError("column " + name + " out of range (data has " +
                            std::to_string(ds.X.cols()) + " feature columns)");
        std::vector<double> v(ds.n());
        for (std::size_t i = 0; i < ds.n(); ++i) v[i] = ds.X(i, static_cast<std::size_t>(c));
        return v;
    }
    throw UserError("unknown column '" + name + "' (expected y, z, or x<k>)");
}

Matrix columns_matrix(const LabeledDataset& ds, const std::vector<std::string>& names) {
    Matrix out(ds.n(), names.size());
    for (std::size_t c = 0; c < names.size(); ++c) {
        auto v = column_values(ds, names[c]);
        for (std::size_t i = 0; i < ds.n(); ++i) out(i, c) = v[i];
    }
    return out;
}

std::vector<int> int_column(const LabeledDataset& ds, const std::string& name) {
    auto v = column_values(ds, name);
    std::vector<int> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        double r = std::round(v[i]);
        if (std::abs(v[i] - r) > 1e-9 || r < 0)
            throw UserError("column '" + name +
                            "' is not a nonnegative integer column; required by the "
                            "exact-discrete estimator");
        out[i] = static_cast<int>(r);
    }
    return out;
}

std::string fmt_value(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

std::string estimator_name(Estimator e) {
    switch (e) {
        case Estimator::exact_discrete: return "exact-discrete";
        case Estimator::dv_neural: return "dv-neural";
        case Estimator::gaussian_closed_form: return "gaussian-closed-form";
    }
    return "?";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"information-theoretic bias measurement and debiasing toolkit"};
    app.require_subcommand(1);

    // gen-data ---------------------------------------------------------------
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic spurious-correlation dataset");
    std::string gen_out, gen_config;
    SpuriousSpec gd;
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_option("--config", gen_config, "config file with a [data] section");
    gen->add_option("--n", gd.n, "train sample count");
    gen->add_option("--corr", gd.corr, "train correlation p(z = y)");
    gen->add_option("--d-core", gd.d_core, "core feature dims");
    gen->add_option("--d-bias", gd.d_bias, "bias feature dims");
    gen->add_option("--d-noise", gd.d_noise, "noise dims");
    gen->add_option("--sep", gd.signal_sep, "class separation");
    gen->add_option("--sigma", gd.noise_sigma, "noise stddev");
    gen->add_option("--seed", gd.seed, "generation seed");

    // estimate-mi -------------------------------------------------------------
    auto* emi = app.add_subcommand("estimate-mi", "estimate mutual information between columns");
    std::string emi_csv, emi_u = "y", emi_v = "z", emi_est = "exact", emi_json;
    bool emi_mm = false;
    std::uint64_t emi_seed = 0;
    EstimatorConfig emi_cfg;
    emi->add_option("--csv", emi_csv, "dataset CSV (gen-data format)")->required();
    emi->add_option("--u", emi_u, "first variable: comma list of columns (y, z, x<k>)");
    emi->add_option("--v", emi_v, "second variable: comma list of columns");
    emi->add_option("--estimator", emi_est, "exact | dv | gaussian (default exact)");
    emi->add_flag("--miller-madow", emi_mm, "bias correction for the exact estimator");
    emi->add_option("--seed", emi_seed, "estimator seed");
    emi->add_option("--epochs", emi_cfg.epochs, "dv: training epochs");
    emi->add_option("--batch", emi_cfg.batch, "dv: batch size");
    emi->add_option("--lr", emi_cfg.lr, "dv: learning rate");
    emi->add_option("--json", emi_json, "also write the estimate as JSON to this path");

    // train -------------------------------------------------------------------
    auto* tr = app.add_subcommand("train", "run the configured method x seed grid");
    std::string tr_config, tr_out, tr_methods, tr_seeds;
    int tr_jobs = 1;
    tr->add_option("--config", tr_config, "experiment config file")->required();
    tr->add_option("--out", tr_out, "output directory (overrides run.out)");
    tr->add_option("--methods", tr_methods, "comma list (overrides run.methods)");
    tr->add_option("--seeds", tr_seeds, "comma list (overrides run.seeds)");
    tr->add_option("--jobs", tr_jobs, "concurrent runs");

    // report ------------------------------------------------------------------
    auto* rep = app.add_subcommand("report", "aggregate persisted run reports into tables");
    std::vector<std::string> rep_dirs;
    std::string rep_out = ".";
    rep->add_option("dirs", rep_dirs, "run directories (each holding report.json), or parents")
        ->required();
    rep->add_option("--out", rep_out, "directory for table.{txt,csv,json}");

    // sweep -------------------------------------------------------------------
    auto* sw = app.add_subcommand("sweep", "sweep one parameter over a value list");
    std::string sw_param, sw_values, sw_config, sw_out, sw_method;
    int sw_jobs = 1;
    sw->add_option("--param", sw_param, "beta | rho | corr")->required();
    sw->add_option("--values", sw_values, "comma list of values")->required();
    sw->add_option("--config", sw_config, "base experiment config")->required();
    sw->add_option("--out", sw_out, "output directory (overrides run.out)");
    sw->add_option("--method", sw_method, "training method (default depends on param)");
    sw->add_option("--jobs", sw_jobs, "concurrent runs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    bool loading = true;  // phase marker: failures while loading are user errors
    try {
        if (gen->parsed()) {
            if (!gen_config.empty()) {
                Config c = Config::load(gen_config);
                SpuriousSpec file_spec = spec_from_config(c);
                // explicit flags win over the config file
                if (gen->count("--n") == 0) gd.n = file_spec.n;
                if (gen->count("--corr") == 0) gd.corr = file_spec.corr;
                if (gen->count("--d-core") == 0) gd.d_core = file_spec.d_core;
                if (gen->count("--d-bias") == 0) gd.d_bias = file_spec.d_bias;
                if (gen->count("--d-noise") == 0) gd.d_noise = file_spec.d_noise;
                if (gen->count("--sep") == 0) gd.signal_sep = file_spec.signal_sep;
                if (gen->count("--sigma") == 0) gd.noise_sigma = file_spec.noise_sigma;
                if (gen->count("--seed") == 0) gd.seed = file_spec.seed;
                gd.A = file_spec.A;
                gd.B = file_spec.B;
                gd.shift = file_spec.shift;
            }
            if (auto s = env_seed()) gd.seed = *s;
            gd.validate();
            loading = false;

            DatasetPair pair = generate(gd);
            fs::create_directories(gen_out);
            save_csv(pair.train, (fs::path(gen_out) / "train.csv").string());
            save_csv(pair.test, (fs::path(gen_out) / "test.csv").string());
            Config resolved;
            resolved.set("data.n", std::to_string(gd.n));
            resolved.set("data.A", std::to_string(gd.A));
            resolved.set("data.B", std::to_string(gd.B));
            resolved.set("data.corr", fmt_g17(gd.corr));
            resolved.set("data.d_core", std::to_string(gd.d_core));
            resolved.set("data.d_bias", std::to_string(gd.d_bias));
            resolved.set("data.d_noise", std::to_string(gd.d_noise));
            resolved.set("data.signal_sep", fmt_g17(gd.signal_sep));
            resolved.set("data.noise_sigma", fmt_g17(gd.noise_sigma));
            resolved.set("data.seed", std::to_string(gd.seed));
            if (gd.shift) {
                resolved.set("data.shift_corr", fmt_g17(gd.shift->corr));
                resolved.set("data.shift_signal_sep", fmt_g17(gd.shift->signal_sep));
            }
            resolved.save((fs::path(gen_out) / "spec.ini").string());
            std::cout << "wrote " << gen_out << "/train.csv (" << pair.train.n() << " rows), "
                      << gen_out << "/test.csv (" << pair.test.n() << " rows)\n";
        } else if (emi->parsed()) {
            if (auto s = env_seed()) emi_seed = *s;
            LabeledDataset ds = load_csv(emi_csv);
            auto u_names = split(emi_u, ',');
            auto v_names = split(emi_v, ',');
            if (u_names.empty() || v_names.empty()) throw UserError("empty column list");
            MIEstimate est;
            if (emi_est == "exact") {
                if (u_names.size() != 1 || v_names.size() != 1)
                    throw UserError("the exact estimator takes exactly one column per variable");
                std::vector<int> u = int_column(ds, u_names[0]);
                std::vector<int> v = int_column(ds, v_names[0]);
                int umax = *std::max_element(u.begin(), u.end());
                int vmax = *std::max_element(v.begin(), v.end());
                loading = false;
                auto t = ContingencyTable::from_samples(
                    u, v, static_cast<std::size_t>(umax) + 1, static_cast<std::size_t>(vmax) + 1);
                est = exact_mi(t, ds.n(), emi_mm);
            } else if (emi_est == "dv") {
                Matrix mu = columns_matrix(ds, u_names);
                Matrix mv = columns_matrix(ds, v_names);
                loading = false;
                auto run = train_mi_estimator(mu, mv, emi_cfg, RngState(emi_seed));
                est = run.estimate;
            } else if (emi_est == "gaussian") {
                if (u_names.size() != 1 || v_names.size() != 1)
                    throw UserError("the gaussian estimator takes exactly one column per variable");
                auto u = column_values(ds, u_names[0]);
                auto v = column_values(ds, v_names[0]);
                loading = false;
                double mu = 0, mv = 0;
                for (std::size_t i = 0; i < u.size(); ++i) { mu += u[i]; mv += v[i]; }
                mu /= u.size();
                mv /= v.size();
                double suv = 0, suu = 0, svv = 0;
                for (std::size_t i = 0; i < u.size(); ++i) {
                    suv += (u[i] - mu) * (v[i] - mv);
                    suu += (u[i] - mu) * (u[i] - mu);
                    svv += (v[i] - mv) * (v[i] - mv);
                }
                if (suu == 0.0 || svv == 0.0)
                    throw std::runtime_error("a column is constant; correlation undefined");
                est.value = gaussian_mi_oracle(suv / std::sqrt(suu * svv));
                est.estimator = Estimator::gaussian_closed_form;
                est.is_lower_bound = false;
                est.n_samples = ds.n();
            } else {
                throw UserError("unknown estimator '" + emi_est +
                                "' (expected exact | dv | gaussian)");
            }
            json j = {{"value", est.value},
                      {"estimator", estimator_name(est.estimator)},
                      {"is_lower_bound", est.is_lower_bound},
                      {"n_samples", est.n_samples ? json(*est.n_samples) : json(nullptr)}};
            std::cout << "I = " << est.value << " nats (" << estimator_name(est.estimator)
                      << ", n = " << (est.n_samples ? std::to_string(*est.n_samples) : "?")
                      << ")\n";
            if (!emi_json.empty()) write_file(emi_json, j.dump(2) + "\n");
        } else if (tr->parsed()) {
            Config c = Config::load(tr_config);
            std::string out = !tr_out.empty() ? tr_out : c.get_str("run.out", "runs");
            std::string methods_s =
                !tr_methods.empty() ? tr_methods : c.get_str("run.methods", "erm");
            std::vector<std::string> methods;
            for (const auto& m : split(methods_s, ',')) methods.push_back(canonical_method(m));
            std::vector<std::uint64_t> seeds =
                parse_seed_list(!tr_seeds.empty() ? tr_seeds : c.get_str("run.seeds", "0"));
            if (auto s = env_seed()) seeds = {*s};

            DatasetPair pair;
            if (c.has("data.csv_train")) {
                pair.train = load_csv(c.get_str("data.csv_train"));
                pair.test = load_csv(c.get_str("data.csv_test"));
            } else {
                SpuriousSpec spec = spec_from_config(c);
                if (auto s = env_seed()) spec.seed = *s;
                spec.validate();
                pair = generate(spec);
            }
            ReportConfig rcfg = report_from_config(c);
            std::vector<std::function<void()>> jobs;
            for (const auto& method : methods) {
                TrainConfig tcfg = train_from_config(c, method);
                tcfg.validate(pair.train.A);
                for (std::uint64_t seed : seeds) {
                    fs::path dir = fs::path(out) / (method + "-seed" + std::to_string(seed));
                    jobs.push_back([method, seed, &pair, tcfg, rcfg, dir]() {
                        run_single(method, seed, pair, tcfg, rcfg, dir);
                    });
                }
            }
            loading = false;
            fs::create_directories(out);
            c.save((fs::path(out) / "config.ini").string());
            run_jobs(jobs, tr_jobs);
            std::cout << "completed " << jobs.size() << " runs under " << out << "\n";
        } else if (rep->parsed()) {
            // accept run dirs directly or parents of run dirs
            std::vector<fs::path> run_dirs;
            for (const auto& d : rep_dirs) {
                fs::path p(d);
                if (!fs::exists(p)) throw UserError("no such directory: " + d);
                if (fs::exists(p / "report.json")) {
                    run_dirs.push_back(p);
                    continue;
                }
                std::vector<fs::path> subs;
                for (const auto& e : fs::directory_iterator(p))
                    if (e.is_directory() && fs::exists(e.path() / "report.json"))
                        subs.push_back(e.path());
                std::sort(subs.begin(), subs.end());
                run_dirs.insert(run_dirs.end(), subs.begin(), subs.end());
            }
            if (run_dirs.empty()) throw UserError("no report.json found under the given dirs");
            std::vector<std::pair<std::string, json>> rows;
            for (const auto& d : run_dirs) {
                json j = read_json_file(d / "report.json");
                std::string method =
                    j.contains("run") ? j["run"].value("method", "?") : std::string("?");
                rows.emplace_back(method, j);
            }
            loading = false;
            Aggregate agg = aggregate_reports(rows);
            std::string txt = aligned_table(agg, "method");
            fs::create_directories(rep_out);
            write_file(fs::path(rep_out) / "table.txt", txt);
            write_file(fs::path(rep_out) / "table.csv", csv_table(agg, "method"));
            write_file(fs::path(rep_out) / "table.json", json_table(agg).dump(2) + "\n");
            std::cout << txt;
        } else if (sw->parsed()) {
            Config c = Config::load(sw_config);
            if (sw_param != "beta" && sw_param != "rho" && sw_param != "corr")
                throw UserError("--param must be beta, rho, or corr");
            std::vector<double> values = parse_double_list(sw_values);
            std::string method = !sw_method.empty() ? canonical_method(sw_method)
                                 : sw_param == "beta" ? "regularizer"
                                 : sw_param == "rho"  ? "noise"
                                                      : "erm";
            std::string out = !sw_out.empty() ? sw_out : c.get_str("run.out", "sweep");
            std::vector<std::uint64_t> seeds = parse_seed_list(c.get_str("run.seeds", "0"));
            if (auto s = env_seed()) seeds = {*s};
            ReportConfig rcfg = report_from_config(c);
            TrainConfig base_tcfg = train_from_config(c, method);

            // data: fixed across the sweep unless corr is the swept parameter
            std::optional<DatasetPair> fixed_pair;
            SpuriousSpec spec = spec_from_config(c);
            if (auto s = env_seed()) spec.seed = *s;
            if (c.has("data.csv_train")) {
                if (sw_param == "corr")
                    throw UserError("a corr sweep regenerates data; remove data.csv_train");
                fixed_pair = DatasetPair{load_csv(c.get_str("data.csv_train")),
                                         load_csv(c.get_str("data.csv_test"))};
            } else {
                spec.validate();
                if (sw_param != "corr") fixed_pair = generate(spec);
            }

            struct SweepRun {
                double value;
                std::uint64_t seed;
                fs::path dir;
            };
            std::vector<SweepRun> planned;
            std::vector<std::shared_ptr<DatasetPair>> pairs;  // keep value-datasets alive
            std::vector<std::function<void()>> jobs;
            std::size_t run_index = 0;
            for (double value : values) {
                std::shared_ptr<DatasetPair> pair;
                if (sw_param == "corr") {
                    SpuriousSpec s2 = spec;
                    s2.corr = value;
                    s2.validate();
                    pair = std::make_shared<DatasetPair>(generate(s2));
                } else {
                    pair = std::make_shared<DatasetPair>(*fixed_pair);
                }
                pairs.push_back(pair);
                TrainConfig tcfg = base_tcfg;
                if (sw_param == "beta") tcfg.beta = value;
                if (sw_param == "rho") tcfg.rho = value;
                tcfg.validate(pair->train.A);
                for (std::uint64_t seed : seeds) {
                    // each run draws from a stream derived from (seed, run index)
                    std::uint64_t run_seed =
                        RngState(seed, run_index).derive("sweep-run").next_u64();
                    fs::path dir = fs::path(out) / (sw_param + "=" + fmt_value(value) + "-seed" +
                                                    std::to_string(seed));
                    planned.push_back({value, seed, dir});
                    jobs.push_back([method, run_seed, pair, tcfg, rcfg, dir]() {
                        run_single(method, run_seed, *pair, tcfg, rcfg, dir);
                    });
                    run_index++;
                }
            }
            loading = false;
            fs::create_directories(out);
            c.save((fs::path(out) / "config.ini").string());
            run_jobs(jobs, sw_jobs);

            std::vector<std::pair<std::string, json>> rows;
            for (const auto& r : planned)
                rows.emplace_back(sw_param + "=" + fmt_value(r.value),
                                  read_json_file(r.dir / "report.json"));
            Aggregate agg = aggregate_reports(rows);
            std::string txt = aligned_table(agg, sw_param);
            write_file(fs::path(out) / "sweep_table.txt", txt);
            write_file(fs::path(out) / "sweep_table.csv", csv_table(agg, sw_param));
            write_file(fs::path(out) / "sweep_table.json", json_table(agg).dump(2) + "\n");
            std::cout << txt;
        }
    } catch (const UserError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << (loading ? "error: " : "numerical failure: ") << e.what() << "\n";
        return loading ? 1 : 2;
    }
    return 0;
}

// Command-line front end: every subcommand is a pure function of
// (config, seed), numeric outputs carry no timestamps (those live in the
// .meta.json sidecar), and all work goes through the public library surface.

#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gwinf/asymptotics.hpp"
#include "gwinf/gfiter.hpp"
#include "gwinf/json_io.hpp"
#include "gwinf/meanmatrix.hpp"
#include "gwinf/model.hpp"
#include "gwinf/montecarlo.hpp"

namespace {

constexpr const char* kVersion = "0.1.0";

using nlohmann::json;
using namespace gwinf;

struct CommonOpts {
    std::string model_path;
    long long n = 1000;
    long long trials = 10000;
    std::uint64_t seed = 0;
    int threads = 0;
    int truncation = 0;          // 0 = keep the document's value
    std::string tail_policy;     // empty = keep the document's value
    std::string csv_path;
    std::string json_path;
};

int resolve_threads(int cli_threads) {
    if (cli_threads > 0) return cli_threads;
    if (const char* env = std::getenv("GWINF_THREADS")) {
        const int t = std::atoi(env);
        if (t > 0) return t;
    }
    return 1;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::ios_base::failure("cannot open file: " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

json provenance(const std::string& command, const CommonOpts& opts) {
    std::ostringstream canon;
    canon << command << '|' << opts.model_path << '|' << opts.n << '|' << opts.trials << '|'
          << opts.seed << '|' << opts.truncation << '|' << opts.tail_policy;
    std::string model_bytes;
    try {
        model_bytes = read_file(opts.model_path);
    } catch (...) {
    }
    std::ostringstream hash;
    hash << std::hex << fnv1a64(canon.str() + '\n' + model_bytes);
    return json{{"version", kVersion},
                {"command", command},
                {"model", opts.model_path},
                {"seed", opts.seed},
                {"config_hash", hash.str()}};
}

void emit_json(const json& doc, const CommonOpts& opts) {
    const std::string text = doc.dump(2) + "\n";
    if (opts.json_path.empty()) {
        std::cout << text;
        return;
    }
    write_text_file(opts.json_path, text);
    json meta{{"written_at", static_cast<long long>(std::time(nullptr))},
              {"provenance", doc.contains("provenance") ? doc["provenance"] : json()}};
    write_text_file(opts.json_path + ".meta.json", meta.dump(2) + "\n");
}

void write_sidecar(const std::string& path, const json& prov) {
    json meta{{"written_at", static_cast<long long>(std::time(nullptr))}, {"provenance", prov}};
    write_text_file(path + ".meta.json", meta.dump(2) + "\n");
}

ModelSpec load_spec(const CommonOpts& opts) {
    ModelSpec spec = load_model_spec(opts.model_path);
    if (opts.truncation > 0) spec.truncation_N = opts.truncation;
    if (!opts.tail_policy.empty())
        spec.tail_policy =
            opts.tail_policy == "project" ? TailPolicy::ProjectLast : TailPolicy::Discard;
    return spec;
}

struct Pipeline {
    Model model;
    TruncatedMeanMatrix M;
    EigenSystem es;
};

Pipeline build_pipeline(const ModelSpec& spec) {
    Pipeline p{Model::compile(spec), {}, {}};
    p.M = build_truncated(p.model);
    p.es = eigen_pair(p.M);
    return p;
}

int cmd_validate(const CommonOpts& opts) {
    ModelSpec spec = load_spec(opts);
    ValidationReport rep = validate_spec(spec);
    json doc = to_json(rep);
    doc["model"] = spec.name;
    doc["provenance"] = provenance("validate", opts);
    emit_json(doc, opts);
    return rep.valid() ? 0 : 1;
}

int cmd_matrix(const CommonOpts& opts) {
    Pipeline p = build_pipeline(load_spec(opts));
    ClassReport rep = check_class_m1(p.model, p.M, p.es);
    json doc{{"model", p.model.spec().name},
             {"N", p.M.N},
             {"tail_bound", p.M.tail_bound},
             {"row_sum_bound", p.M.row_sum_bound},
             {"eigen", to_json(p.es)},
             {"class_report", to_json(rep)}};
    doc["provenance"] = provenance("matrix", opts);
    if (!opts.csv_path.empty()) {
        write_eigen_csv(opts.csv_path, p.es);
        write_sidecar(opts.csv_path, doc["provenance"]);
    }
    emit_json(doc, opts);
    return 0;
}

int cmd_iterate(const CommonOpts& opts) {
    Pipeline p = build_pipeline(load_spec(opts));
    IterationTrace trace = survival_curve(p.model, static_cast<int>(opts.n), p.es);
    RatioDiagnostic rd = ratio_diagnostic(trace);
    json doc{{"model", p.model.spec().name},
             {"n_max", trace.n_max},
             {"q_final", trace.q.back()},
             {"sup_Q_final", trace.sup_Q.back()},
             {"ratio_sup_final", trace.ratio_sup.back()},
             {"ratio_threshold", rd.threshold},
             {"ratio_n0", rd.n0},
             // Sups above cover retained types only; mass beyond the
             // truncation is bounded by this per-generation figure.
             {"truncation_tail_bound", p.model.truncation_error_bound()}};
    doc["provenance"] = provenance("iterate", opts);
    if (!opts.csv_path.empty()) {
        write_trace_csv(opts.csv_path, trace);
        write_sidecar(opts.csv_path, doc["provenance"]);
    }
    emit_json(doc, opts);
    return 0;
}

int cmd_phi_fit(const CommonOpts& opts) {
    Pipeline p = build_pipeline(load_spec(opts));
    PhiCurve curve = sample_phi_curve(p.model, p.es);
    AlphaFit fit = fit_alpha(curve);
    json doc{{"model", p.model.spec().name}, {"U", curve.U}, {"alpha_fit", to_json(fit)}};
    doc["provenance"] = provenance("phi-fit", opts);
    if (!opts.csv_path.empty()) {
        write_phi_curve_csv(opts.csv_path, curve);
        write_sidecar(opts.csv_path, doc["provenance"]);
    }
    emit_json(doc, opts);
    return 0;
}

int cmd_predict(const CommonOpts& opts) {
    Pipeline p = build_pipeline(load_spec(opts));
    PhiCurve curve = sample_phi_curve(p.model, p.es);
    std::vector<long long> grid;
    for (long long n = 1; n <= opts.n; n = std::max(n + 1, n * 5 / 4))
        grid.push_back(n);
    if (grid.empty() || grid.back() != opts.n) grid.push_back(opts.n);
    SurvivalPrediction pred = predict_q(curve, 1.0, grid);
    json doc{{"model", p.model.spec().name}, {"prediction", to_json(pred)}};
    doc["provenance"] = provenance("predict", opts);
    emit_json(doc, opts);
    return 0;
}

std::vector<int> default_checkpoints(int horizon) {
    std::vector<int> cps;
    for (int n : {horizon / 4, horizon / 2, horizon})
        if (n > 0 && (cps.empty() || n > cps.back())) cps.push_back(n);
    if (cps.empty()) cps.push_back(horizon);
    return cps;
}

int cmd_simulate(const CommonOpts& opts, const std::vector<int>& record_at, int start_type1) {
    Pipeline p = build_pipeline(load_spec(opts));
    SimConfig cfg;
    cfg.root_seed = opts.seed;
    cfg.trials = opts.trials;
    cfg.horizon = static_cast<int>(opts.n);
    cfg.record_at = record_at.empty() ? default_checkpoints(cfg.horizon) : record_at;
    cfg.start_type = start_type1 - 1;
    cfg.threads = resolve_threads(opts.threads);
    RunResult run = run_trials(cfg, p.model);

    // Generating-function reference Q_{start}(n) at the checkpoints,
    // iterated directly so nothing per-generation is stored.
    const int N = p.model.num_types();
    std::vector<double> Q(N, 1.0), tbuf(N), Qn(N);
    std::map<int, double> q_gf;
    std::size_t ci = 0;
    for (int n = 0; n <= cfg.horizon && ci < cfg.record_at.size(); ++n) {
        if (cfg.record_at[ci] == n) {
            q_gf[n] = Q[cfg.start_type];
            ++ci;
        }
        if (n < cfg.horizon) {
            p.model.qstep(Q, tbuf, Qn);
            Q.swap(Qn);
        }
    }
    json estimates = json::array();
    for (int n : cfg.record_at) {
        SurvivalEstimate est = estimate_survival(run, n);
        json e = to_json(est);
        e["Q_gf"] = q_gf.at(n);
        estimates.push_back(e);
    }
    json doc{{"model", p.model.spec().name},
             {"horizon", cfg.horizon},
             {"trials", cfg.trials},
             {"exploded", run.exploded_count},
             {"estimates", estimates}};
    doc["provenance"] = provenance("simulate", opts);
    if (!opts.csv_path.empty()) {
        write_trials_csv(opts.csv_path, run);
        write_sidecar(opts.csv_path, doc["provenance"]);
    }
    emit_json(doc, opts);
    return 0;
}

int cmd_yaglom(const CommonOpts& opts, std::vector<double> lambda_scales,
               std::vector<int> start_types) {
    Pipeline p = build_pipeline(load_spec(opts));
    const int N = p.model.num_types();
    const int horizon = static_cast<int>(opts.n);
    if (lambda_scales.empty()) lambda_scales = {0.5, 1.0, 2.0};
    if (start_types.empty()) start_types = {1};

    IterationTrace trace = survival_curve(p.model, horizon, p.es);
    const double q_n = trace.q[horizon];
    PhiCurve curve = sample_phi_curve(p.model, p.es);
    AlphaFit fit = fit_alpha(curve);

    json runs = json::array();
    std::ostringstream samples_csv;
    samples_csv << "start_type,trial,type,scaled_count\n";
    for (int st1 : start_types) {
        SimConfig cfg;
        cfg.root_seed = opts.seed + static_cast<std::uint64_t>(st1);
        cfg.trials = opts.trials;
        cfg.horizon = horizon;
        cfg.record_at = {horizon};
        cfg.start_type = st1 - 1;
        cfg.threads = resolve_threads(opts.threads);
        RunResult run = run_trials(cfg, p.model);

        json per_lambda = json::array();
        for (double t : lambda_scales) {
            std::vector<double> lambda(N, t);
            LaplaceEstimate est = empirical_laplace(run, horizon, lambda, q_n);
            json e = to_json(est);
            e["lambda_scale"] = t;
            e["limit"] = limit_laplace(p.es.v, fit.alpha_hat, lambda);
            per_lambda.push_back(e);
        }
        runs.push_back(json{{"start_type", st1},
                            {"q_n", q_n},
                            {"estimates", per_lambda}});
        if (!opts.csv_path.empty()) {
            long long trial = 0;
            for (const auto& tr : run.trials) {
                if (tr.alive[0] && !tr.exploded)
                    for (auto [ty, c] : tr.snapshots[0].counts)
                        if (ty < 5)
                            samples_csv << st1 << ',' << trial << ',' << (ty + 1) << ','
                                        << (q_n * double(c)) << '\n';
                ++trial;
            }
        }
    }
    json doc{{"model", p.model.spec().name},
             {"n", horizon},
             {"alpha_hat", fit.alpha_hat},
             {"runs", runs}};
    doc["provenance"] = provenance("yaglom", opts);
    if (!opts.csv_path.empty()) {
        write_text_file(opts.csv_path, samples_csv.str());
        write_sidecar(opts.csv_path, doc["provenance"]);
    }
    emit_json(doc, opts);
    return 0;
}

int cmd_verify(const CommonOpts& opts) {
    Pipeline p = build_pipeline(load_spec(opts));
    const int N = p.model.num_types();
    if (p.model.is_linear()) {
        TheoremReport rep;
        rep.hypothesis_ok = false;
        rep.gate_note = "offspring map is linear (F = Ms), excluded by hypothesis";
        json doc = to_json(rep);
        doc["provenance"] = provenance("verify", opts);
        emit_json(doc, opts);
        return 1;
    }

    IterationTrace trace = survival_curve(p.model, static_cast<int>(opts.n), p.es);
    PhiCurve curve = sample_phi_curve(p.model, p.es);
    AlphaFit fit = fit_alpha(curve);

    const int n_mc = std::min<int>(200, static_cast<int>(opts.n));
    const double q_n = trace.q[n_mc];
    std::vector<YaglomMeasurement> mc;
    std::vector<int> starts = N >= 2 ? std::vector<int>{0, 1} : std::vector<int>{0};
    for (int st : starts) {
        SimConfig cfg;
        cfg.root_seed = opts.seed + static_cast<std::uint64_t>(st);
        cfg.trials = opts.trials;
        cfg.horizon = n_mc;
        cfg.record_at = {n_mc};
        cfg.start_type = st;
        cfg.threads = resolve_threads(opts.threads);
        RunResult run = run_trials(cfg, p.model);
        YaglomMeasurement m;
        m.start_type = st;
        m.lambda.assign(N, 1.0);
        m.q_n = q_n;
        LaplaceEstimate est = empirical_laplace(run, n_mc, m.lambda, q_n);
        m.value = est.value;
        m.ci_lo = est.ci_lo;
        m.ci_hi = est.ci_hi;
        mc.push_back(std::move(m));
    }

    TheoremReport rep = verify_theorem(p.model, p.es, &trace, &fit, mc);
    json doc = to_json(rep);
    doc["model"] = p.model.spec().name;
    doc["alpha_hat"] = fit.alpha_hat;
    doc["provenance"] = provenance("verify", opts);
    emit_json(doc, opts);
    return rep.all_pass() ? 0 : 2;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"critical branching processes with countably many types: "
                 "generating-function iteration, eigenstructure, tail-index "
                 "extraction and Monte Carlo verification"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::vector<int> record_at;
    std::vector<double> lambda_scales;
    std::vector<int> start_types;
    int start_type1 = 1;

    auto add_common = [&](CLI::App* sub, bool needs_model = true) {
        auto* m = sub->add_option("--model", opts.model_path, "model document (JSON)");
        if (needs_model) m->required();
        sub->add_option("--n", opts.n, "generations / horizon");
        sub->add_option("--trials", opts.trials, "Monte Carlo trials");
        sub->add_option("--seed", opts.seed, "root seed");
        sub->add_option("--threads", opts.threads, "worker count (default GWINF_THREADS or 1)");
        sub->add_option("--truncation", opts.truncation, "override truncation_N");
        sub->add_option("--tail-policy", opts.tail_policy, "discard | project")
            ->check(CLI::IsMember({"discard", "project"}));
        sub->add_option("--csv", opts.csv_path, "primary CSV output path");
        sub->add_option("--json", opts.json_path, "JSON report path (default stdout)");
    };

    CLI::App* validate = app.add_subcommand("validate", "check a model document");
    add_common(validate);
    CLI::App* matrix = app.add_subcommand("matrix", "mean matrix, eigen pair, class report");
    add_common(matrix);
    CLI::App* iterate = app.add_subcommand("iterate", "generating-function iteration trace");
    add_common(iterate);
    CLI::App* phifit = app.add_subcommand("phi-fit", "sample the survival deficit and fit the tail index");
    add_common(phifit);
    CLI::App* predict = app.add_subcommand("predict", "survival curve from the cumulative relation");
    add_common(predict);
    CLI::App* simulate = app.add_subcommand("simulate", "forward Monte Carlo with survival estimates");
    add_common(simulate);
    simulate->add_option("--record", record_at, "checkpoint generations");
    simulate->add_option("--start-type", start_type1, "1-based start type");
    CLI::App* yaglom = app.add_subcommand("yaglom", "conditional limit law: empirical vs predicted");
    add_common(yaglom);
    yaglom->add_option("--lambda-scale", lambda_scales, "scalar multiples of the all-ones lambda");
    yaglom->add_option("--start-types", start_types, "1-based start types");
    CLI::App* verify = app.add_subcommand("verify", "one-shot end-to-end verification report");
    add_common(verify);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 64;
    }

    try {
        if (validate->parsed()) return cmd_validate(opts);
        if (matrix->parsed()) return cmd_matrix(opts);
        if (iterate->parsed()) return cmd_iterate(opts);
        if (phifit->parsed()) return cmd_phi_fit(opts);
        if (predict->parsed()) return cmd_predict(opts);
        if (simulate->parsed()) return cmd_simulate(opts, record_at, start_type1);
        if (yaglom->parsed()) return cmd_yaglom(opts, lambda_scales, start_types);
        if (verify->parsed()) return cmd_verify(opts);
    } catch (const std::ios_base::failure& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 1;
    } catch (const std::domain_error& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 2;
    }
    return 64;
}

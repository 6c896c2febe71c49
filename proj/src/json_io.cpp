#include "gwinf/json_io.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

namespace gwinf {

using nlohmann::json;

namespace {

std::string fmt(double x) {
    std::ostringstream os;
    os << std::setprecision(17) << x;
    return os.str();
}

const char* criticality_name(Criticality c) {
    switch (c) {
        case Criticality::Sub: return "SUB";
        case Criticality::Critical: return "CRITICAL";
        case Criticality::Super: return "SUPER";
    }
    return "?";
}

} // namespace

ModelSpec parse_model_spec(const json& doc) {
    ModelSpec spec;
    const std::string family = doc.value("family", "slack_kernel");
    if (family == "slack_kernel")
        spec.family = Family::SlackKernel;
    else if (family == "tabulated")
        spec.family = Family::Tabulated;
    else if (family == "linear")
        spec.family = Family::Linear;
    else
        throw std::invalid_argument("unknown family: " + family);

    spec.name = doc.value("name", "");
    spec.alpha = doc.value("alpha", 1.0);
    spec.truncation_N = doc.value("truncation_N", 2);
    const std::string policy = doc.value("tail_policy", "discard");
    if (policy == "discard")
        spec.tail_policy = TailPolicy::Discard;
    else if (policy == "project_last")
        spec.tail_policy = TailPolicy::ProjectLast;
    else
        throw std::invalid_argument("unknown tail_policy: " + policy);

    if (doc.contains("slack_coeffs"))
        spec.slack_coeffs = doc.at("slack_coeffs").get<std::vector<double>>();

    if (doc.contains("kernel")) {
        const json& k = doc.at("kernel");
        const std::string type = k.value("type", "geometric");
        if (type == "geometric") {
            GeometricKernel g;
            g.rho = k.at("rho").get<std::vector<double>>();
            spec.kernel = std::move(g);
        } else if (type == "rows") {
            ExplicitKernel e;
            e.rows = k.at("rows").get<std::vector<std::vector<double>>>();
            spec.kernel = std::move(e);
        } else {
            throw std::invalid_argument("unknown kernel type: " + type);
        }
    }

    if (doc.contains("tabulated_rows")) {
        for (const json& r : doc.at("tabulated_rows")) {
            TabulatedRow row;
            for (const json& o : r.at("outcomes")) {
                TabulatedOutcome out;
                out.prob = o.at("prob").get<double>();
                if (o.contains("children"))
                    for (auto it = o.at("children").begin(); it != o.at("children").end(); ++it) {
                        const int type1 = std::stoi(it.key());  // 1-based in documents
                        out.children.emplace_back(type1 - 1, it.value().get<long long>());
                    }
                row.outcomes.push_back(std::move(out));
            }
            spec.tabulated_rows.push_back(std::move(row));
        }
    }
    return spec;
}

ModelSpec load_model_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::ios_base::failure("cannot open model file: " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw std::ios_base::failure("cannot parse model file " + path + ": " + e.what());
    }
    ModelSpec spec = parse_model_spec(doc);
    if (spec.name.empty()) spec.name = path;
    return spec;
}

json to_json(const ValidationReport& rep) {
    return json{{"valid", rep.valid()},
                {"violations", rep.violations},
                {"linear_excluded", rep.linear_excluded}};
}

json to_json(const EigenSystem& es, bool include_vectors) {
    json j{{"rho", es.rho},
           {"U", es.U},
           {"residual_left", es.residual_left},
           {"residual_right", es.residual_right},
           {"iterations", es.iterations}};
    if (include_vectors) {
        j["v"] = es.v;
        j["u"] = es.u;
    }
    return j;
}

json to_json(const ClassReport& rep) {
    json tail = json::array();
    for (const auto& e : rep.cond_iii_tail)
        tail.push_back({{"N0", e.n0}, {"raw", e.raw}, {"scaled", e.scaled}});
    json trunc = json::array();
    for (const auto& e : rep.cond_iii_trunc)
        trunc.push_back({{"K", e.K}, {"value", e.value}});
    return json{{"irreducible", rep.irreducible},
                {"aperiodic", rep.aperiodic},
                {"R_estimate", rep.R_estimate},
                {"R_width", rep.R_width},
                {"criticality", criticality_name(rep.criticality)},
                {"conclusive", rep.conclusive},
                {"positivity_proxy", rep.positivity},
                {"U", rep.U},
                {"cond_iii_tail", tail},
                {"cond_iii_trunc", trunc},
                {"C_iv", rep.C_iv},
                {"m_iv", rep.m_iv},
                {"c_iv", rep.c_iv},
                {"row_bound_C", rep.row_bound_C},
                {"frak_m", rep.frak_m},
                {"cond_iii_ok", rep.cond_iii_ok},
                {"cond_iv_ok", rep.cond_iv_ok},
                {"in_M1", rep.in_m1},
                {"in_M1_0", rep.in_m10}};
}

json to_json(const RadiusDiagnostic& rd) {
    return json{{"R", rd.R}, {"confidence_width", rd.confidence_width}, {"r_n", rd.r_n}};
}

json to_json(const AlphaFit& fit) {
    return json{{"alpha_hat", fit.alpha_hat},
                {"fit_rmse", fit.fit_rmse},
                {"excluded", fit.excluded},
                {"grid", fit.grid},
                {"ell_values", fit.ell_values}};
}

json to_json(const SurvivalPrediction& pred) {
    return json{{"n", pred.n},
                {"q_pred", pred.q_pred},
                {"ell1_proxy", pred.ell1_proxy},
                {"method", pred.method == PredictMethod::ClosedForm ? "CLOSED_FORM" : "QUADRATURE"},
                {"alpha_used", pred.alpha_used},
                {"C_used", pred.C_used}};
}

json to_json(const SurvivalEstimate& est) {
    return json{{"n", est.n},
                {"trials", est.trials},
                {"survivors", est.survivors},
                {"exploded", est.exploded},
                {"p_hat", est.p_hat},
                {"stderr", est.stderr_},
                {"cond_mean_per_type", est.cond_mean_per_type}};
}

json to_json(const LaplaceEstimate& est) {
    return json{{"value", est.value},
                {"ci_lo", est.ci_lo},
                {"ci_hi", est.ci_hi},
                {"survivors", est.survivors},
                {"excluded_exploded", est.excluded_exploded}};
}

json to_json(const TheoremReport& rep) {
    json claims = json::array();
    for (const auto& c : rep.claims)
        claims.push_back({{"claim", c.claim},
                          {"relation", c.relation},
                          {"measured", c.measured},
                          {"tolerance", c.tolerance},
                          {"pass", c.pass},
                          {"note", c.note}});
    return json{{"hypothesis_ok", rep.hypothesis_ok},
                {"gate_note", rep.gate_note},
                {"claims", claims},
                {"gaps", rep.gaps},
                {"all_pass", rep.all_pass()}};
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::ios_base::failure("cannot write file: " + path);
    out << text;
    if (!out) throw std::ios_base::failure("write failed: " + path);
}

void write_eigen_csv(const std::string& path, const EigenSystem& es) {
    std::ostringstream os;
    os << "index,v,u\n";
    for (std::size_t i = 0; i < es.v.size(); ++i)
        os << (i + 1) << ',' << fmt(es.v[i]) << ',' << fmt(es.u[i]) << '\n';
    write_text_file(path, os.str());
}

void write_trace_csv(const std::string& path, const IterationTrace& trace) {
    std::ostringstream os;
    os << "n,q,sup_Q,ratio_sup,B,phi_q\n";
    for (std::size_t n = 0; n < trace.q.size(); ++n) {
        os << n << ',' << fmt(trace.q[n]) << ',' << fmt(trace.sup_Q[n]) << ','
           << fmt(trace.ratio_sup[n]) << ',';
        if (n < trace.B.size()) os << fmt(trace.B[n]);
        os << ',' << fmt(trace.phi_q[n]) << '\n';
    }
    write_text_file(path, os.str());
}

void write_trials_csv(const std::string& path, const RunResult& run) {
    std::ostringstream os;
    os << "trial";
    for (int n : run.cfg.record_at) os << ",alive_at_" << n;
    os << ",final_total,exploded\n";
    for (std::size_t k = 0; k < run.trials.size(); ++k) {
        const auto& tr = run.trials[k];
        os << k;
        for (std::size_t c = 0; c < tr.alive.size(); ++c)
            os << ',' << int(tr.alive[c]);
        const long long final_total =
            tr.snapshots.empty() ? 0 : tr.snapshots.back().total;
        os << ',' << final_total << ',' << int(tr.exploded) << '\n';
    }
    write_text_file(path, os.str());
}

void write_phi_curve_csv(const std::string& path, const PhiCurve& curve) {
    std::ostringstream os;
    os << "x,phi\n";
    for (std::size_t k = 0; k < curve.x.size(); ++k)
        os << fmt(curve.x[k]) << ',' << fmt(curve.phi[k]) << '\n';
    write_text_file(path, os.str());
}

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace gwinf

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

#include "gwinf/json_io.hpp"
#include "testutil.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string bin() {
    const char* b = std::getenv("GWINF_BIN");
    REQUIRE(b != nullptr);
    return b;
}

std::string models() {
    const char* m = std::getenv("GWINF_MODELS");
    REQUIRE(m != nullptr);
    return m;
}

int run(const std::string& args) {
    const std::string cmd = bin() + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

struct TmpDir {
    fs::path path;
    TmpDir() {
        path = fs::temp_directory_path() / "gwinf_cli_test";
        fs::create_directories(path);
    }
    ~TmpDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

} // namespace

TEST_CASE("validate: exit codes for valid, invalid and missing models") {
    TmpDir tmp;
    CHECK(run("validate --model " + models() + "/chain_alpha1.json") == 0);

    const fs::path bad = tmp.path / "bad_c.json";
    std::ofstream(bad) << R"({"family":"slack_kernel","alpha":0.5,
        "slack_coeffs":[0.8],"kernel":{"type":"geometric","rho":[0.5]},
        "truncation_N":8,"tail_policy":"discard"})";
    const fs::path rep = tmp.path / "rep.json";
    CHECK(run("validate --model " + bad.string() + " --json " + rep.string()) == 1);
    json doc = json::parse(slurp(rep));
    CHECK_FALSE(doc["valid"].get<bool>());
    REQUIRE_FALSE(doc["violations"].empty());
    CHECK(doc["violations"][0].get<std::string>().find("c_1") != std::string::npos);

    CHECK(run("validate --model " + tmp.path.string() + "/does_not_exist.json") == 3);
}

TEST_CASE("unknown flags exit with the usage code") {
    CHECK(run("iterate --model x.json --definitely-not-a-flag 3") == 64);
    CHECK(run("frobnicate") == 64);
}

TEST_CASE("iterate emits one CSV row per generation and matches the oracle") {
    TmpDir tmp;
    const fs::path csv = tmp.path / "trace.csv";
    CHECK(run("iterate --model " + models() + "/rank1.json --n 500 --csv " + csv.string() +
              " --json " + (tmp.path / "it.json").string()) == 0);
    std::ifstream in(csv);
    std::string line;
    std::getline(in, line);
    CHECK(line == "n,q,sup_Q,ratio_sup,B,phi_q");
    auto oracle = gwtest::scalar_recursion(7.0L / 30.0L, 1.0L, 500);
    int rows = 0;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string n_s, q_s;
        std::getline(ls, n_s, ',');
        std::getline(ls, q_s, ',');
        const int n = std::stoi(n_s);
        const double q = std::stod(q_s);
        CHECK(std::abs(q - double(oracle[n])) <= 1e-9 * double(oracle[n]));
        ++rows;
    }
    CHECK(rows == 501);
}

TEST_CASE("primary outputs are byte-identical across reruns") {
    TmpDir tmp;
    const fs::path a = tmp.path / "a.csv";
    const fs::path b = tmp.path / "b.csv";
    const std::string common =
        "simulate --model " + models() + "/single_kolmogorov.json --n 50 --trials 2000 "
        "--seed 99 --record 50 ";
    CHECK(run(common + "--csv " + a.string() + " --json " + (tmp.path / "ja.json").string()) == 0);
    CHECK(run(common + "--csv " + b.string() + " --json " + (tmp.path / "jb.json").string()) == 0);
    CHECK(slurp(a) == slurp(b));
    CHECK(slurp(tmp.path / "ja.json") == slurp(tmp.path / "jb.json"));
    // Timestamps live in the sidecar, not the primary output.
    CHECK(fs::exists(a.string() + ".meta.json"));
    CHECK(slurp(a).find("written_at") == std::string::npos);
}

TEST_CASE("matrix subcommand writes the eigenvector CSV") {
    TmpDir tmp;
    const fs::path csv = tmp.path / "eigen.csv";
    CHECK(run("matrix --model " + models() + "/chain_alpha1.json --csv " + csv.string() +
              " --json " + (tmp.path / "m.json").string()) == 0);
    json doc = json::parse(slurp(tmp.path / "m.json"));
    CHECK(doc["class_report"]["in_M1_0"].get<bool>());
    std::ifstream in(csv);
    std::string header;
    std::getline(in, header);
    CHECK(header == "index,v,u");
    int rows = 0;
    for (std::string line; std::getline(in, line);) ++rows;
    CHECK(rows == 200);
}

TEST_CASE("verify: small end-to-end run passes, linear models are refused") {
    TmpDir tmp;
    const fs::path rep = tmp.path / "verify.json";
    CHECK(run("verify --model " + models() + "/single_kolmogorov.json --n 20000 "
              "--trials 20000 --seed 7 --json " + rep.string()) == 0);
    json doc = json::parse(slurp(rep));
    CHECK(doc["all_pass"].get<bool>());
    CHECK(doc.contains("provenance"));
    CHECK(doc["provenance"]["seed"].get<int>() == 7);

    const fs::path lin = tmp.path / "linear.json";
    std::ofstream(lin) << R"({"family":"linear",
        "kernel":{"type":"geometric","rho":[0.5]},
        "truncation_N":8,"tail_policy":"project_last"})";
    CHECK(run("verify --model " + lin.string() + " --n 100 --trials 100 --seed 1 --json " +
              (tmp.path / "lin_rep.json").string()) == 1);
    json lrep = json::parse(slurp(tmp.path / "lin_rep.json"));
    CHECK_FALSE(lrep["hypothesis_ok"].get<bool>());
}

TEST_CASE("phi-fit and predict smoke runs") {
    TmpDir tmp;
    CHECK(run("phi-fit --model " + models() + "/chain_alpha05.json --json " +
              (tmp.path / "fit.json").string()) == 0);
    json fit = json::parse(slurp(tmp.path / "fit.json"));
    CHECK(fit["alpha_fit"]["alpha_hat"].get<double>() == doctest::Approx(0.5).epsilon(1e-3));

    CHECK(run("predict --model " + models() + "/chain_alpha1.json --n 1000 --json " +
              (tmp.path / "pred.json").string()) == 0);
    json pred = json::parse(slurp(tmp.path / "pred.json"));
    const auto& q = pred["prediction"]["q_pred"];
    REQUIRE(q.size() > 2);
    CHECK(q.back().get<double>() < q.front().get<double>());
}

TEST_CASE("model documents parse with 1-based type labels") {
    const json doc = json::parse(R"({
      "family": "tabulated",
      "truncation_N": 3,
      "tail_policy": "project_last",
      "tabulated_rows": [
        {"outcomes": [
          {"prob": 0.5, "children": {}},
          {"prob": 0.5, "children": {"2": 2, "4": 1}}
        ]}
      ]
    })");
    gwinf::ModelSpec spec = gwinf::parse_model_spec(doc);
    gwinf::Model m = gwinf::Model::compile(spec);
    // Type 4 lies beyond the 3-type window and lands on the last type.
    CHECK(m.law(0).outcomes[1].children ==
          std::vector<std::pair<int, long long>>{{1, 2}, {2, 1}});
    CHECK(m.law(0).mean_row == std::vector<double>{0.0, 1.0, 0.5});
    CHECK(m.law(0).full_row_sum == doctest::Approx(1.5));
}

TEST_CASE("yaglom subcommand compares empirical and limit transforms") {
    TmpDir tmp;
    const fs::path rep = tmp.path / "yaglom.json";
    CHECK(run("yaglom --model " + models() + "/single_kolmogorov.json --n 100 "
              "--trials 30000 --seed 5 --json " + rep.string()) == 0);
    json doc = json::parse(slurp(rep));
    for (const auto& r : doc["runs"])
        for (const auto& e : r["estimates"]) {
            const double est = e["value"].get<double>();
            const double lim = e["limit"].get<double>();
            CHECK(std::abs(est - lim) < 0.1);
        }
}

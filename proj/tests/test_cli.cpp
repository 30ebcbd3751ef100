#include "safecert/cli.hpp"
#include "safecert/io.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace safecert;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome call(const std::vector<std::string>& args) {
    std::ostringstream o, e;
    const int code = cli::run(args, o, e);
    return {code, o.str(), e.str()};
}

fs::path problem(const char* name) { return fs::path(SAFECERT_PROBLEM_DIR) / name; }

fs::path scratch() {
    const auto d = fs::temp_directory_path() / "safecert_cli_test";
    fs::create_directories(d);
    return d;
}

}  // namespace

TEST_CASE("bound prints the delta = 0 example") {
    const auto r = call({"bound", "--beta", "0.01", "--delta", "0", "--T", "100", "--b0", "0.9"});
    CHECK(r.code == cli::kOk);
    CHECK(r.out.find("alpha: 0.670571") != std::string::npos);
    CHECK(r.out.find("case: delta_nonneg") != std::string::npos);
}

TEST_CASE("bound with a negative delta reports that case") {
    const auto r = call({"bound", "--beta", "0.05", "--delta", "-0.01", "--T", "5", "--sigma", "0.95"});
    CHECK(r.code == cli::kOk);
    CHECK(r.out.find("case: delta_negative") != std::string::npos);
}

TEST_CASE("bound rejects an out-of-range delta") {
    CHECK(call({"bound", "--beta", "0.1", "--delta", "0.5", "--T", "10", "--b0", "0.5"}).code == cli::kUsage);
}

TEST_CASE("select-delta prints both branches") {
    const auto r = call({"select-delta", "--alpha-bar", "0.3", "--beta", "0.1", "--sigma", "0.9", "--T", "10"});
    CHECK(r.code == cli::kOk);
    CHECK(r.out.find("z=0: empty") != std::string::npos);
    CHECK(r.out.find("z=1: [0.0751817, 0.1]") != std::string::npos);
}

TEST_CASE("synth succeeds on the double integrator and reports infeasibility on the pendulum") {
    const auto dir = scratch();
    const auto ok = call({"synth", problem("double_integrator.json").string(), "--out", (dir / "di.json").string()});
    CHECK(ok.code == cli::kOk);
    CHECK(ok.out.find("status: optimal") != std::string::npos);
    CHECK(fs::exists(dir / "di.json"));
    const auto bad = call({"synth", problem("pendulum.json").string(), "--out", (dir / "pen.json").string()});
    CHECK(bad.code == cli::kInfeasible);
}

TEST_CASE("synth rejects lambda outside (0,1)") {
    const auto dir = scratch();
    auto j = io::read_json(problem("double_integrator.json"));
    j["params"]["lambda"] = 1.5;
    io::write_text(dir / "bad_lambda.json", io::dump(j));
    const auto r = call({"synth", (dir / "bad_lambda.json").string(), "--out", (dir / "x.json").string()});
    CHECK(r.code == cli::kUsage);
    CHECK(r.err.find("lambda must lie in (0,1)") != std::string::npos);
}

TEST_CASE("verify passes a fresh certificate and fails an enlarged one") {
    const auto dir = scratch();
    const auto cert = dir / "di_verify.json";
    REQUIRE(call({"synth", problem("double_integrator.json").string(), "--out", cert.string()}).code == cli::kOk);
    const auto good = call({"verify", cert.string(), problem("double_integrator.json").string()});
    CHECK(good.code == cli::kOk);
    CHECK(good.out.find("verdict: passed") != std::string::npos);

    auto j = io::read_json(cert);
    auto file = io::certificate_from_json(j);
    const Certificate& c = file.certificate;
    const Certificate big(c.omega() * 1.5, c.y() * 1.5, c.mode(), c.params());
    file = io::CertificateFile{big, big.gain(), file.residuals, file.bound};
    io::write_certificate(dir / "di_big.json", file);
    const auto bad = call({"verify", (dir / "di_big.json").string(), problem("double_integrator.json").string()});
    CHECK(bad.code == cli::kVerifyFailed);
    CHECK(bad.out.find("verdict: failed") != std::string::npos);
}

TEST_CASE("filter-run writes a CSV and rejects zero runs") {
    const auto dir = scratch();
    const auto cert = dir / "di_filter.json";
    REQUIRE(call({"synth", problem("double_integrator.json").string(), "--out", cert.string()}).code == cli::kOk);
    const auto csv = dir / "traj.csv";
    const auto r = call({"filter-run", cert.string(), problem("double_integrator.json").string(), "--unom", "0,50",
                         "--T", "10", "--runs", "2", "--out", csv.string()});
    CHECK(r.code == cli::kOk);
    std::ifstream in(csv);
    std::string header;
    std::getline(in, header);
    CHECK(header == "run,t,x1,x2,u1,b,fallback");
    int rows = 0;
    for (std::string line; std::getline(in, line);) ++rows;
    CHECK(rows == 2 * 11);
    const auto zero = call({"filter-run", cert.string(), problem("double_integrator.json").string(), "--unom", "0,50",
                            "--runs", "0", "--out", csv.string()});
    CHECK(zero.code == cli::kUsage);
}

TEST_CASE("usage errors and help") {
    CHECK(call({"--help"}).code == cli::kOk);
    CHECK(call({}).code == cli::kUsage);
    CHECK(call({"bound", "--beta", "0.1"}).code == cli::kUsage);
    CHECK(call({"reproduce", "nope", "--out", (scratch() / "nope").string()}).code == cli::kUsage);
    CHECK(call({"synth", "/nonexistent/problem.json", "--out", (scratch() / "n.json").string()}).code == cli::kUsage);
}

#include "safecert/io.hpp"

#include "safecert/verify.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace safecert::io {

using nlohmann::json;

namespace {

json number_or_null(double v) {
    if (!std::isfinite(v)) return nullptr;
    return v;
}

double get_number(const json& j, const std::string& what) {
    if (!j.is_number()) throw FormatError(what + " must be a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) throw FormatError(what + " must be finite");
    return v;
}

std::optional<double> opt_number(const json& obj, const char* key, const std::string& scope) {
    if (!obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
    return get_number(obj.at(key), scope + "." + key);
}

const json& require(const json& obj, const char* key, const std::string& scope) {
    if (!obj.is_object()) throw FormatError(scope + " must be an object");
    if (!obj.contains(key)) throw FormatError("missing " + scope + "." + key);
    return obj.at(key);
}

std::string get_string(const json& obj, const char* key, const std::string& scope, const std::string& fallback) {
    if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
    if (!obj.at(key).is_string()) throw FormatError(scope + "." + key + " must be a string");
    return obj.at(key).get<std::string>();
}

json params_to_json(const CertificateParams& p) {
    json j;
    j["beta"] = p.beta;
    j["lambda"] = p.lambda ? json(*p.lambda) : json(nullptr);
    j["delta"] = p.delta ? json(*p.delta) : json(nullptr);
    j["T"] = p.horizon ? json(*p.horizon) : json(nullptr);
    j["sigma"] = p.sigma ? json(*p.sigma) : json(nullptr);
    return j;
}

CertificateParams params_from_json(const json& j) {
    CertificateParams p;
    p.beta = get_number(require(j, "beta", "params"), "params.beta");
    p.lambda = opt_number(j, "lambda", "params");
    p.delta = opt_number(j, "delta", "params");
    p.sigma = opt_number(j, "sigma", "params");
    if (j.contains("T") && !j.at("T").is_null()) {
        if (!j.at("T").is_number_integer()) throw FormatError("params.T must be an integer");
        p.horizon = j.at("T").get<int>();
    }
    return p;
}

}  // namespace

json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
        rows.push_back(std::move(row));
    }
    return rows;
}

Matrix matrix_from_json(const json& j, const std::string& what) {
    if (!j.is_array() || j.empty()) throw FormatError(what + " must be a non-empty array of rows");
    // a flat array of numbers is a column
    if (j.front().is_number()) {
        Matrix m(static_cast<Eigen::Index>(j.size()), 1);
        for (std::size_t i = 0; i < j.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = get_number(j[i], what);
        return m;
    }
    const std::size_t cols = j.front().is_array() ? j.front().size() : 0;
    if (cols == 0) throw FormatError(what + " rows must be non-empty arrays");
    Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_array() || j[i].size() != cols) throw FormatError(what + " is not rectangular");
        for (std::size_t k = 0; k < cols; ++k)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = get_number(j[i][k], what);
    }
    return m;
}

json vector_to_json(const Vector& v) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

Vector vector_from_json(const json& j, const std::string& what) {
    const Matrix m = matrix_from_json(j, what);
    if (m.cols() == 1) return m.col(0);
    if (m.rows() == 1) return m.row(0).transpose();
    throw FormatError(what + " must be a vector");
}

std::string to_string(risk::BoundCase c) {
    return c == risk::BoundCase::DeltaNegative ? "delta_negative" : "delta_nonneg";
}

Problem problem_from_json(const json& j) {
    if (!j.is_object()) throw FormatError("problem must be an object");
    Problem p;

    const json& plant = require(j, "plant", "problem");
    p.plant.A = matrix_from_json(require(plant, "A", "plant"), "plant.A");
    p.plant.B = matrix_from_json(require(plant, "B", "plant"), "plant.B");
    p.plant.D = plant.contains("D") ? matrix_from_json(plant.at("D"), "plant.D")
                                    : Matrix(Matrix::Identity(p.plant.A.rows(), p.plant.A.rows()));

    const json& noise = require(j, "noise", "problem");
    const std::string kind = get_string(noise, "kind", "noise", "unit_ball");
    if (kind == "unit_ball") {
        p.noise = NoiseModel::unit_ball(opt_number(noise, "radius", "noise").value_or(1.0));
    } else if (kind == "gaussian") {
        p.noise = NoiseModel::gaussian(matrix_from_json(require(noise, "covariance", "noise"), "noise.covariance"));
    } else if (kind == "empirical") {
        const json& s = require(noise, "samples", "noise");
        if (!s.is_array()) throw FormatError("noise.samples must be an array");
        std::vector<Vector> samples;
        for (const auto& row : s) samples.push_back(vector_from_json(row, "noise.samples"));
        p.noise = NoiseModel::empirical(std::move(samples));
        if (noise.contains("covariance")) p.noise.covariance = matrix_from_json(noise.at("covariance"), "noise.covariance");
    } else {
        throw FormatError("unknown noise kind '" + kind + "'");
    }

    const auto n = p.plant.A.rows();
    const json& safe = require(j, "safe_set", "problem");
    if (safe.contains("halfspaces")) {
        const json& hs = safe.at("halfspaces");
        if (!hs.is_array()) throw FormatError("safe_set.halfspaces must be an array");
        for (const auto& row : hs) p.spec.halfspaces.push_back(vector_from_json(row, "safe_set.halfspaces"));
    }
    if (safe.contains("box") && !safe.at("box").is_null()) {
        const double c = get_number(safe.at("box"), "safe_set.box");
        if (c <= 0.0) throw FormatError("safe_set.box must be positive");
        for (auto& a : SafetySpec::box(n, c)) p.spec.halfspaces.push_back(std::move(a));
    }
    if (safe.contains("ellipsoid_S") && !safe.at("ellipsoid_S").is_null())
        p.spec.ellipsoidal_safe = matrix_from_json(safe.at("ellipsoid_S"), "safe_set.ellipsoid_S");

    const json& init = require(j, "initial_set", "problem");
    p.spec.initial_R = matrix_from_json(require(init, "R", "initial_set"), "initial_set.R");
    p.spec.initial_margin = opt_number(init, "sigma", "initial_set").value_or(0.0);

    if (j.contains("input_set")) {
        const json& in = j.at("input_set");
        const std::string ik = get_string(in, "kind", "input_set", "free");
        if (ik == "free") {
            p.spec.input_set = FreeInput{};
        } else if (ik == "polytope") {
            p.spec.input_set = PolytopeInput{matrix_from_json(require(in, "H", "input_set"), "input_set.H"),
                                             vector_from_json(require(in, "h", "input_set"), "input_set.h")};
        } else if (ik == "box") {
            // |u_i| <= c as the polytope [I; -I] u <= c
            const double c = get_number(require(in, "bound", "input_set"), "input_set.bound");
            const auto m = p.plant.B.cols();
            Matrix H(2 * m, m);
            H << Matrix::Identity(m, m), -Matrix::Identity(m, m);
            p.spec.input_set = PolytopeInput{H, Vector::Constant(2 * m, c)};
        } else if (ik == "norm_ball") {
            p.spec.input_set = NormBallInput{get_number(require(in, "u_bar", "input_set"), "input_set.u_bar")};
        } else {
            throw FormatError("unknown input_set kind '" + ik + "'");
        }
    }

    const json& par = require(j, "params", "problem");
    ProblemParams& q = p.params;
    const std::string mode = get_string(par, "mode", "params", "infinite");
    if (mode != "infinite" && mode != "finite") throw FormatError("params.mode must be 'infinite' or 'finite'");
    q.mode = synthesis_mode_from_string(mode);
    q.beta = get_number(require(par, "beta", "params"), "params.beta");
    q.lambda = opt_number(par, "lambda", "params");
    q.delta = opt_number(par, "delta", "params");
    q.alpha_bar = opt_number(par, "alpha_bar", "params");
    q.rho = opt_number(par, "rho", "params");
    if (par.contains("T") && !par.at("T").is_null()) {
        if (!par.at("T").is_number_integer()) throw FormatError("params.T must be an integer");
        q.horizon = par.at("T").get<int>();
    }
    const std::string tm = get_string(par, "trace_mode", "params", "sound_trace");
    if (tm == "sound_trace") q.trace_mode = synth::TraceMode::SoundTrace;
    else if (tm == "paper_literal") q.trace_mode = synth::TraceMode::PaperLiteral;
    else throw FormatError("params.trace_mode must be 'sound_trace' or 'paper_literal'");
    const std::string obj = get_string(par, "objective", "params", "trace");
    if (obj == "trace") q.objective = synth::ObjectiveKind::Trace;
    else if (obj == "logdet") q.objective = synth::ObjectiveKind::LogDet;
    else throw FormatError("params.objective must be 'trace' or 'logdet'");
    const std::string robust = get_string(par, "robust", "params", "none");
    if (robust == "none") q.robust = RobustKind::None;
    else if (robust == "gelbrich") q.robust = RobustKind::Gelbrich;
    else if (robust == "frobenius") q.robust = RobustKind::Frobenius;
    else throw FormatError("params.robust must be 'none', 'gelbrich' or 'frobenius'");
    if (par.contains("x0") && !par.at("x0").is_null()) q.x0 = vector_from_json(par.at("x0"), "params.x0");
    return p;
}

json problem_to_json(const Problem& p) {
    json j;
    j["plant"] = {{"A", matrix_to_json(p.plant.A)}, {"B", matrix_to_json(p.plant.B)}, {"D", matrix_to_json(p.plant.D)}};

    json noise;
    switch (p.noise.kind) {
        case NoiseKind::UnitBall:
            noise["kind"] = "unit_ball";
            noise["radius"] = p.noise.radius;
            break;
        case NoiseKind::Gaussian:
            noise["kind"] = "gaussian";
            noise["covariance"] = matrix_to_json(p.noise.covariance);
            break;
        case NoiseKind::Empirical: {
            noise["kind"] = "empirical";
            json s = json::array();
            for (const auto& v : p.noise.samples) s.push_back(vector_to_json(v));
            noise["samples"] = s;
            if (p.noise.covariance.size() > 0) noise["covariance"] = matrix_to_json(p.noise.covariance);
            break;
        }
    }
    j["noise"] = noise;

    json safe = json::object();
    json hs = json::array();
    for (const auto& a : p.spec.halfspaces) hs.push_back(vector_to_json(a));
    safe["halfspaces"] = hs;
    if (p.spec.ellipsoidal_safe) safe["ellipsoid_S"] = matrix_to_json(*p.spec.ellipsoidal_safe);
    j["safe_set"] = safe;

    j["initial_set"] = {{"R", matrix_to_json(p.spec.initial_R)}, {"sigma", p.spec.initial_margin}};

    json in;
    if (std::holds_alternative<FreeInput>(p.spec.input_set)) {
        in["kind"] = "free";
    } else if (const auto* poly = std::get_if<PolytopeInput>(&p.spec.input_set)) {
        in["kind"] = "polytope";
        in["H"] = matrix_to_json(poly->H);
        in["h"] = vector_to_json(poly->h);
    } else {
        in["kind"] = "norm_ball";
        in["u_bar"] = std::get<NormBallInput>(p.spec.input_set).u_bar;
    }
    j["input_set"] = in;

    const ProblemParams& q = p.params;
    json par;
    par["mode"] = to_string(q.mode);
    par["beta"] = q.beta;
    if (q.lambda) par["lambda"] = *q.lambda;
    if (q.delta) par["delta"] = *q.delta;
    if (q.horizon) par["T"] = *q.horizon;
    if (q.alpha_bar) par["alpha_bar"] = *q.alpha_bar;
    if (q.rho) par["rho"] = *q.rho;
    par["trace_mode"] = q.trace_mode == synth::TraceMode::SoundTrace ? "sound_trace" : "paper_literal";
    par["objective"] = q.objective == synth::ObjectiveKind::Trace ? "trace" : "logdet";
    par["robust"] = q.robust == RobustKind::None ? "none" : q.robust == RobustKind::Gelbrich ? "gelbrich" : "frobenius";
    if (q.x0) par["x0"] = vector_to_json(*q.x0);
    j["params"] = par;
    return j;
}

CertificateFile make_certificate_file(const Certificate& cert, const SafetySpec& spec, double lmi_residual,
                                      std::optional<risk::RiskBound> bound) {
    const auto c = verify::check_containment(cert, spec);
    CertificateFile f{cert, cert.gain(), {}, std::nullopt};
    f.residuals.containment_initial = c.initial;
    if (std::isfinite(c.safe)) f.residuals.containment_safe = c.safe;
    if (c.ellipsoid)
        f.residuals.containment_safe = std::min(f.residuals.containment_safe.value_or(*c.ellipsoid), *c.ellipsoid);
    f.residuals.lmi_max = lmi_residual;
    if (bound) f.bound = BoundRecord{bound->alpha, to_string(bound->bound_case), bound->eta_star, bound->b0};
    return f;
}

json certificate_to_json(const CertificateFile& c) {
    json j;
    j["Omega"] = matrix_to_json(c.certificate.omega());
    j["Y"] = matrix_to_json(c.certificate.y());
    j["K"] = matrix_to_json(c.recorded_gain);
    j["mode"] = to_string(c.certificate.mode());
    j["status"] = to_string(c.certificate.solver_status());
    j["objective"] = number_or_null(c.certificate.objective_value());
    j["params"] = params_to_json(c.certificate.params());
    j["residuals"] = {{"containment_initial", number_or_null(c.residuals.containment_initial)},
                      {"containment_safe", c.residuals.containment_safe ? number_or_null(*c.residuals.containment_safe)
                                                                        : json(nullptr)},
                      {"lmi_max", number_or_null(c.residuals.lmi_max)}};
    if (c.bound) {
        j["bound"] = {{"alpha", c.bound->alpha},
                      {"case", c.bound->bound_case},
                      {"eta_star", number_or_null(c.bound->eta_star)},
                      {"b0", c.bound->b0}};
    } else {
        j["bound"] = nullptr;
    }
    return j;
}

CertificateFile certificate_from_json(const json& j) {
    if (!j.is_object()) throw FormatError("certificate must be an object");
    const Matrix omega = matrix_from_json(require(j, "Omega", "certificate"), "Omega");
    const Matrix y = matrix_from_json(require(j, "Y", "certificate"), "Y");
    const Matrix k = matrix_from_json(require(j, "K", "certificate"), "K");
    const std::string mode = get_string(j, "mode", "certificate", "infinite");
    if (mode != "infinite" && mode != "finite") throw FormatError("certificate.mode must be 'infinite' or 'finite'");
    const SolverStatus status = solver_status_from_string(get_string(j, "status", "certificate", "optimal"));
    const double objective =
        j.contains("objective") && !j.at("objective").is_null() ? get_number(j.at("objective"), "objective") : 0.0;
    const CertificateParams params = params_from_json(require(j, "params", "certificate"));

    std::optional<Certificate> cert;
    try {
        cert.emplace(omega, y, synthesis_mode_from_string(mode), params, objective, status);
    } catch (const std::invalid_argument& e) {
        throw FormatError(std::string("invalid certificate: ") + e.what());
    }
    if (k.rows() != cert->gain().rows() || k.cols() != cert->gain().cols())
        throw FormatError("K has the wrong shape");
    const double scale = 1.0 + cert->gain().cwiseAbs().maxCoeff();
    if ((k - cert->gain()).cwiseAbs().maxCoeff() > 1e-8 * scale)
        throw FormatError("recorded K disagrees with Y Omega^{-1}");

    CertificateFile f{*cert, k, {}, std::nullopt};
    if (j.contains("residuals") && j.at("residuals").is_object()) {
        const json& r = j.at("residuals");
        f.residuals.containment_initial = opt_number(r, "containment_initial", "residuals").value_or(0.0);
        f.residuals.containment_safe = opt_number(r, "containment_safe", "residuals");
        f.residuals.lmi_max = opt_number(r, "lmi_max", "residuals").value_or(0.0);
    }
    if (j.contains("bound") && j.at("bound").is_object()) {
        const json& b = j.at("bound");
        BoundRecord rec;
        rec.alpha = get_number(require(b, "alpha", "bound"), "bound.alpha");
        rec.bound_case = get_string(b, "case", "bound", "");
        rec.eta_star = opt_number(b, "eta_star", "bound").value_or(std::numeric_limits<double>::infinity());
        rec.b0 = opt_number(b, "b0", "bound").value_or(0.0);
        f.bound = rec;
    }
    return f;
}

std::string dump(const json& j) {
    // nlohmann keeps object keys sorted and prints doubles in shortest round-trip form
    return j.dump(2) + "\n";
}

json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path.string());
    out << text;
    if (!out) throw FormatError("write failed for " + path.string());
}

Problem read_problem(const std::filesystem::path& path) { return problem_from_json(read_json(path)); }

void write_problem(const std::filesystem::path& path, const Problem& p) { write_text(path, dump(problem_to_json(p))); }

CertificateFile read_certificate(const std::filesystem::path& path) { return certificate_from_json(read_json(path)); }

void write_certificate(const std::filesystem::path& path, const CertificateFile& c) {
    write_text(path, dump(certificate_to_json(c)));
}

}  // namespace safecert::io

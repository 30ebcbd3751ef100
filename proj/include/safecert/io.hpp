#pragma once

#include "safecert/model.hpp"
#include "safecert/risk.hpp"
#include "safecert/synth.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

namespace safecert::io {

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class RobustKind { None, Gelbrich, Frobenius };

struct ProblemParams {
    SynthesisMode mode = SynthesisMode::InfiniteHorizon;
    double beta = 0.5;
    std::optional<double> lambda;
    std::optional<double> delta;
    std::optional<int> horizon;
    std::optional<double> alpha_bar;
    std::optional<double> rho;
    RobustKind robust = RobustKind::None;
    synth::TraceMode trace_mode = synth::TraceMode::SoundTrace;
    synth::ObjectiveKind objective = synth::ObjectiveKind::Trace;
    std::optional<Vector> x0;
};

struct Problem {
    Plant plant;
    NoiseModel noise;
    SafetySpec spec;
    ProblemParams params;
};

struct Residuals {
    double containment_initial = 0.0;
    std::optional<double> containment_safe;  // absent without half-spaces
    double lmi_max = 0.0;                    // most negative LMI eigenvalue at the solution
};

struct BoundRecord {
    double alpha = 1.0;
    std::string bound_case;
    double eta_star = 1.0;
    double b0 = 0.0;
};

struct CertificateFile {
    Certificate certificate;
    Matrix recorded_gain;  // K as stored; checked against Y Omega^{-1} on read
    Residuals residuals;
    std::optional<BoundRecord> bound;
};

[[nodiscard]] nlohmann::json matrix_to_json(const Matrix& m);
[[nodiscard]] Matrix matrix_from_json(const nlohmann::json& j, const std::string& what);
[[nodiscard]] nlohmann::json vector_to_json(const Vector& v);
[[nodiscard]] Vector vector_from_json(const nlohmann::json& j, const std::string& what);

[[nodiscard]] Problem problem_from_json(const nlohmann::json& j);
[[nodiscard]] nlohmann::json problem_to_json(const Problem& p);

[[nodiscard]] CertificateFile certificate_from_json(const nlohmann::json& j);
[[nodiscard]] nlohmann::json certificate_to_json(const CertificateFile& c);

[[nodiscard]] CertificateFile make_certificate_file(const Certificate& cert, const SafetySpec& spec,
                                                    double lmi_residual, std::optional<risk::RiskBound> bound);

// Canonical text: sorted keys, two-space indent, shortest round-trip numbers, trailing newline.
[[nodiscard]] std::string dump(const nlohmann::json& j);

[[nodiscard]] nlohmann::json read_json(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

[[nodiscard]] Problem read_problem(const std::filesystem::path& path);
void write_problem(const std::filesystem::path& path, const Problem& p);
[[nodiscard]] CertificateFile read_certificate(const std::filesystem::path& path);
void write_certificate(const std::filesystem::path& path, const CertificateFile& c);

[[nodiscard]] std::string to_string(risk::BoundCase c);

}  // namespace safecert::io

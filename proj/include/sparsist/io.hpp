#pragma once

// JSON serialization for instances, reports and configs.
//
// Dense matrices are stored as {"shape": [rows, cols], "data": base64} with
// little-endian 64-bit floats in row-major order; vectors use a one-element
// shape. Non-finite numbers are written as the strings "inf", "-inf", "nan".

#include "sparsist/concentration.hpp"
#include "sparsist/datagen.hpp"
#include "sparsist/solver.hpp"

#include <json.hpp>

#include <filesystem>
#include <set>
#include <string>

namespace sparsist::io {

using Json = nlohmann::ordered_json;

constexpr int kSchemaVersion = 1;

/// Malformed or unreadable configuration and input files.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error("ConfigError: " + what) {}
    const char* kind() const noexcept override { return "ConfigError"; }
};

std::string base64_encode(const std::vector<unsigned char>& bytes);
std::vector<unsigned char> base64_decode(const std::string& text);

Json encode_matrix(const MatrixXd& m);
Json encode_vector(const VectorXd& v);
MatrixXd decode_matrix(const Json& j);
VectorXd decode_vector(const Json& j);

Json number(double x);
double read_number(const Json& j);

/// Object reader that rejects fields it was not asked about.
class Fields {
public:
    Fields(const Json& obj, std::string context);

    bool has(const std::string& key) const;
    const Json& require(const std::string& key);
    const Json* optional(const std::string& key);

    double number(const std::string& key);
    double number_or(const std::string& key, double fallback);
    Index integer(const std::string& key);
    Index integer_or(const std::string& key, Index fallback);
    std::uint64_t seed(const std::string& key);
    bool boolean_or(const std::string& key, bool fallback);
    std::string string(const std::string& key);
    std::string string_or(const std::string& key, const std::string& fallback);

    /// Throws ConfigError naming the first unknown field.
    void finish() const;

    [[noreturn]] void fail(const std::string& message) const;

private:
    const Json& obj_;
    std::string context_;
    std::set<std::string> used_;
};

/// Rejects documents whose "schema" is missing or differs from kSchemaVersion.
void check_schema(Fields& f);

Json parse_json(const std::string& text, const std::string& source);
Json read_json(const std::filesystem::path& path);
/// Writes through a temporary file and a rename.
void write_text(const std::filesystem::path& path, const std::string& text);
void write_json(const std::filesystem::path& path, const Json& j);

Json model_to_json(const ModelSpec& m);
ModelSpec model_from_json(const Json& j);

InstanceConfig instance_config_from_json(const Json& j);
Json instance_config_to_json(const InstanceConfig& c);

Json instance_to_json(const Instance& inst);
Instance instance_from_json(const Json& j);
void save_instance(const std::filesystem::path& path, const Instance& inst);
Instance load_instance(const std::filesystem::path& path);

Json support_to_json(const Support& s);
Json estimate_to_json(const Estimate& e, double tau);
Json certificate_to_json(const LsscCertificate& c);
Json condition_report_to_json(const ConditionReport& r);
Json verification_to_json(const VerificationReport& r);
Json tau_to_json(const TauRecommendation& t);

} // namespace sparsist::io

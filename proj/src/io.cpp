#include "sparsist/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace sparsist::io {

static_assert(std::endian::native == std::endian::little, "matrix encoding assumes a little-endian host");

namespace {

constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int decode_char(char c)
{
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
}

std::string type_name(const Json& j)
{
    return j.type_name();
}

} // namespace

std::string base64_encode(const std::vector<unsigned char>& bytes)
{
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 2 < bytes.size(); i += 3) {
        const unsigned v = unsigned(bytes[i]) << 16 | unsigned(bytes[i + 1]) << 8 | bytes[i + 2];
        out += kAlphabet[v >> 18 & 63];
        out += kAlphabet[v >> 12 & 63];
        out += kAlphabet[v >> 6 & 63];
        out += kAlphabet[v & 63];
    }
    if (const std::size_t rest = bytes.size() - i; rest > 0) {
        unsigned v = unsigned(bytes[i]) << 16;
        if (rest == 2) v |= unsigned(bytes[i + 1]) << 8;
        out += kAlphabet[v >> 18 & 63];
        out += kAlphabet[v >> 12 & 63];
        out += rest == 2 ? kAlphabet[v >> 6 & 63] : '=';
        out += '=';
    }
    return out;
}

std::vector<unsigned char> base64_decode(const std::string& text)
{
    if (text.size() % 4 != 0) throw ConfigError("base64 length is not a multiple of 4");
    std::vector<unsigned char> out;
    out.reserve(text.size() / 4 * 3);
    for (std::size_t i = 0; i < text.size(); i += 4) {
        unsigned v = 0;
        int pad = 0;
        for (std::size_t k = 0; k < 4; ++k) {
            const char c = text[i + k];
            if (c == '=' && i + 4 == text.size() && k >= 2) {
                ++pad;
                v <<= 6;
                continue;
            }
            const int d = decode_char(c);
            if (d < 0 || pad > 0) throw ConfigError("invalid base64 data");
            v = v << 6 | unsigned(d);
        }
        out.push_back(static_cast<unsigned char>(v >> 16 & 255));
        if (pad < 2) out.push_back(static_cast<unsigned char>(v >> 8 & 255));
        if (pad < 1) out.push_back(static_cast<unsigned char>(v & 255));
    }
    return out;
}

namespace {

Json encode_data(const double* data, std::size_t count, Json shape)
{
    std::vector<unsigned char> bytes(count * sizeof(double));
    if (count > 0) std::memcpy(bytes.data(), data, bytes.size());
    Json j;
    j["shape"] = std::move(shape);
    j["data"] = base64_encode(bytes);
    return j;
}

std::vector<double> decode_data(const Json& j, std::vector<Index>& shape)
{
    if (!j.is_object() || !j.contains("shape") || !j.contains("data"))
        throw ConfigError("encoded array needs 'shape' and 'data'");
    std::size_t count = 1;
    for (const auto& s : j.at("shape")) {
        if (!s.is_number_integer() || s.get<Index>() < 0) throw ConfigError("array shape must be non-negative integers");
        shape.push_back(s.get<Index>());
        count *= std::size_t(shape.back());
    }
    if (!j.at("data").is_string()) throw ConfigError("array data must be a base64 string");
    const auto bytes = base64_decode(j.at("data").get<std::string>());
    if (bytes.size() != count * sizeof(double)) throw ConfigError("array data does not match its shape");
    std::vector<double> out(count);
    if (count > 0) std::memcpy(out.data(), bytes.data(), bytes.size());
    return out;
}

} // namespace

Json encode_matrix(const MatrixXd& m)
{
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
    return encode_data(rm.data(), std::size_t(rm.size()), Json::array({m.rows(), m.cols()}));
}

Json encode_vector(const VectorXd& v)
{
    return encode_data(v.data(), std::size_t(v.size()), Json::array({v.size()}));
}

MatrixXd decode_matrix(const Json& j)
{
    std::vector<Index> shape;
    const auto data = decode_data(j, shape);
    if (shape.size() != 2) throw ConfigError("matrix shape must have two entries");
    MatrixXd m(shape[0], shape[1]);
    for (Index i = 0; i < shape[0]; ++i)
        for (Index k = 0; k < shape[1]; ++k) m(i, k) = data[std::size_t(i * shape[1] + k)];
    return m;
}

VectorXd decode_vector(const Json& j)
{
    std::vector<Index> shape;
    const auto data = decode_data(j, shape);
    if (shape.size() != 1) throw ConfigError("vector shape must have one entry");
    return Eigen::Map<const VectorXd>(data.data(), shape[0]);
}

Json number(double x)
{
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    return x;
}

double read_number(const Json& j)
{
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf") return infinity<double>();
        if (s == "-inf") return -infinity<double>();
        if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    }
    throw ConfigError("expected a number, got " + type_name(j));
}

// ---------------------------------------------------------------------------
// Strict object reader
// ---------------------------------------------------------------------------

Fields::Fields(const Json& obj, std::string context) : obj_(obj), context_(std::move(context))
{
    if (!obj_.is_object()) fail("expected an object, got " + type_name(obj_));
}

void Fields::fail(const std::string& message) const
{
    throw ConfigError(context_ + ": " + message);
}

bool Fields::has(const std::string& key) const
{
    return obj_.contains(key);
}

const Json& Fields::require(const std::string& key)
{
    if (!obj_.contains(key)) fail("missing required field '" + key + "'");
    used_.insert(key);
    return obj_.at(key);
}

const Json* Fields::optional(const std::string& key)
{
    if (!obj_.contains(key)) return nullptr;
    used_.insert(key);
    return &obj_.at(key);
}

double Fields::number(const std::string& key)
{
    const Json& j = require(key);
    if (!j.is_number()) fail("field '" + key + "' must be a number");
    return j.get<double>();
}

double Fields::number_or(const std::string& key, double fallback)
{
    return has(key) ? number(key) : fallback;
}

Index Fields::integer(const std::string& key)
{
    const Json& j = require(key);
    if (!j.is_number_integer()) fail("field '" + key + "' must be an integer");
    return j.get<Index>();
}

Index Fields::integer_or(const std::string& key, Index fallback)
{
    return has(key) ? integer(key) : fallback;
}

std::uint64_t Fields::seed(const std::string& key)
{
    const Json& j = require(key);
    if (j.is_number_unsigned()) return j.get<std::uint64_t>();
    if (j.is_number_integer() && j.get<std::int64_t>() >= 0) return std::uint64_t(j.get<std::int64_t>());
    fail("field '" + key + "' must be a non-negative integer");
}

bool Fields::boolean_or(const std::string& key, bool fallback)
{
    const Json* j = optional(key);
    if (!j) return fallback;
    if (!j->is_boolean()) fail("field '" + key + "' must be a boolean");
    return j->get<bool>();
}

std::string Fields::string(const std::string& key)
{
    const Json& j = require(key);
    if (!j.is_string()) fail("field '" + key + "' must be a string");
    return j.get<std::string>();
}

std::string Fields::string_or(const std::string& key, const std::string& fallback)
{
    return has(key) ? string(key) : fallback;
}

void Fields::finish() const
{
    for (const auto& item : obj_.items())
        if (!used_.count(item.key())) fail("unknown field '" + item.key() + "'");
}

void check_schema(Fields& f)
{
    if (!f.has("schema")) f.fail("missing 'schema' (expected " + std::to_string(kSchemaVersion) + ")");
    const Json& s = f.require("schema");
    if (!s.is_number_integer() || s.get<long long>() != kSchemaVersion)
        f.fail("schema mismatch: expected version " + std::to_string(kSchemaVersion) + ", got " + s.dump());
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

Json parse_json(const std::string& text, const std::string& source)
{
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(source + ": " + e.what());
    }
}

Json read_json(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_json(ss.str(), path.string());
}

void write_text(const std::filesystem::path& path, const std::string& text)
{
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("cannot write '" + tmp.string() + "'");
        out << text;
        if (!out) throw ConfigError("write to '" + tmp.string() + "' failed");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw ConfigError("cannot move '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
}

void write_json(const std::filesystem::path& path, const Json& j)
{
    write_text(path, j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Models and instances
// ---------------------------------------------------------------------------

Json model_to_json(const ModelSpec& m)
{
    Json j;
    j["name"] = model_name(kind_of(m));
    if (auto* l = std::get_if<LinearModel>(&m)) j["c"] = l->c;
    if (auto* g = std::get_if<GammaModel>(&m)) {
        j["k"] = g->k;
        j["mu"] = g->mu;
    }
    if (auto* g = std::get_if<GraphModel>(&m)) j["d"] = g->d;
    return j;
}

ModelSpec model_from_json(const Json& j)
{
    Fields f(j, "model");
    const std::string name = f.string("name");
    ModelSpec m;
    if (name == "linear") {
        m = LinearModel{f.number_or("c", 1.0)};
    } else if (name == "logistic") {
        m = LogisticModel{};
    } else if (name == "gamma") {
        m = GammaModel{f.number_or("k", 1.0), f.number_or("mu", 1.0)};
    } else if (name == "graph") {
        m = GraphModel{f.integer_or("d", 1)};
    } else {
        f.fail("unknown model '" + name + "'");
    }
    f.finish();
    try {
        validate(m);
    } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("model: ") + e.what());
    }
    return m;
}

namespace {

GraphPattern parse_pattern(Fields& f, const std::string& key)
{
    const std::string p = f.string_or(key, "random");
    if (p == "random") return GraphPattern::Random;
    if (p == "chain") return GraphPattern::Chain;
    f.fail("unknown graph pattern '" + p + "'");
}

DesignFamily parse_family(Fields& f, const std::string& key)
{
    const std::string name = f.string_or(key, "gaussian_iid");
    try {
        return parse_design_family(name);
    } catch (const InvalidArgument&) {
        f.fail("unknown design family '" + name + "'");
    }
}

} // namespace

InstanceConfig instance_config_from_json(const Json& j)
{
    Fields f(j, "instance config");
    check_schema(f);
    InstanceConfig c;
    c.model = model_from_json(f.require("model"));
    c.family = parse_family(f, "design");
    c.n = f.integer("n");
    c.p = f.integer("p");
    c.s = f.integer("s");
    c.beta_min = f.number_or("beta_min", 1.0);
    c.beta_max = f.number_or("beta_max", c.beta_min);
    if (const Json* ap = f.optional("all_positive")) {
        if (!ap->is_boolean()) f.fail("field 'all_positive' must be a boolean");
        c.all_positive = ap->get<bool>();
    }
    c.rho = f.number_or("rho", 0.5);
    c.pattern = parse_pattern(f, "pattern");
    c.seed = f.seed("seed");
    f.finish();
    try {
        c.validate();
    } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("instance config: ") + e.what());
    }
    return c;
}

Json instance_config_to_json(const InstanceConfig& c)
{
    Json j;
    j["schema"] = kSchemaVersion;
    j["model"] = model_to_json(c.model);
    j["design"] = design_family_name(c.family);
    j["n"] = c.n;
    j["p"] = c.p;
    j["s"] = c.s;
    j["beta_min"] = c.beta_min;
    j["beta_max"] = c.beta_max;
    if (c.all_positive) j["all_positive"] = *c.all_positive;
    j["rho"] = c.rho;
    j["pattern"] = c.pattern == GraphPattern::Chain ? "chain" : "random";
    j["seed"] = c.seed;
    return j;
}

Json support_to_json(const Support& s)
{
    Json a = Json::array();
    for (Index i : s) a.push_back(i);
    return a;
}

Json instance_to_json(const Instance& inst)
{
    Json j;
    j["schema"] = kSchemaVersion;
    j["model"] = model_to_json(inst.model);
    j["n"] = inst.n;
    j["p"] = inst.truth.dim();
    j["s"] = inst.truth.s;
    j["seed"] = inst.seed;
    j["X"] = encode_matrix(inst.X);
    j["y"] = encode_vector(inst.y);
    if (inst.kind() == ModelKind::GraphSelect) j["sigma_hat"] = encode_matrix(inst.sigma_hat);
    j["beta_star"] = encode_vector(inst.truth.beta);
    j["support"] = support_to_json(inst.truth.S);
    return j;
}

Instance instance_from_json(const Json& j)
{
    Fields f(j, "instance");
    check_schema(f);
    Instance inst;
    inst.model = model_from_json(f.require("model"));
    inst.n = f.integer("n");
    const Index p = f.integer("p");
    const Index s = f.integer("s");
    inst.seed = f.seed("seed");
    inst.X = decode_matrix(f.require("X"));
    inst.y = decode_vector(f.require("y"));
    if (const Json* sh = f.optional("sigma_hat")) inst.sigma_hat = decode_matrix(*sh);
    inst.truth = GroundTruth::from_beta(decode_vector(f.require("beta_star")));
    const Json& sup = f.require("support");
    f.finish();

    Support listed;
    if (!sup.is_array()) f.fail("'support' must be an array");
    for (const auto& i : sup) {
        if (!i.is_number_integer()) f.fail("'support' entries must be integers");
        listed.push_back(i.get<Index>());
    }
    if (listed != inst.truth.S) f.fail("'support' does not match the nonzeros of beta_star");
    if (inst.truth.dim() != p || inst.truth.s != s) f.fail("'p' or 's' does not match beta_star");
    const bool graph = inst.kind() == ModelKind::GraphSelect;
    if (graph) {
        const Index d = std::get<GraphModel>(inst.model).d;
        if (inst.sigma_hat.rows() != d || inst.sigma_hat.cols() != d || p != d * d)
            f.fail("graph instance needs a d x d 'sigma_hat' and p = d^2");
    } else if (inst.X.rows() != inst.n || inst.X.cols() != p || inst.y.size() != inst.n) {
        f.fail("'X' must be n x p and 'y' must have n entries");
    }
    return inst;
}

void save_instance(const std::filesystem::path& path, const Instance& inst)
{
    write_json(path, instance_to_json(inst));
}

Instance load_instance(const std::filesystem::path& path)
{
    return instance_from_json(read_json(path));
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

Json estimate_to_json(const Estimate& e, double tau)
{
    Json j;
    j["schema"] = kSchemaVersion;
    j["tau"] = number(tau);
    j["converged"] = e.converged;
    j["iterations"] = e.iterations;
    j["kkt_residual"] = number(e.kkt_residual);
    j["objective"] = number(e.objective);
    j["support"] = support_to_json(support_of(e.beta));
    Json values = Json::array();
    for (Index i = 0; i < e.beta.size(); ++i) values.push_back(number(e.beta(i)));
    j["beta"] = values;
    j["beta_encoded"] = encode_vector(e.beta);
    return j;
}

Json certificate_to_json(const LsscCertificate& c)
{
    Json j;
    j["K"] = number(c.K);
    j["neighborhood"] = {{"shape", shape_name(c.neighborhood.shape)},
                         {"radius", number(c.neighborhood.radius)},
                         {"support_restricted", c.neighborhood.support_restricted}};
    j["kappa"] = c.kappa ? Json(*c.kappa) : Json(nullptr);
    j["provenance"] = c.provenance == LsscCertificate::Provenance::Analytic ? "analytic" : "empirical";
    Json k = Json::object();
    const auto put = [&](const char* name, const std::optional<double>& v) {
        if (v) k[name] = number(*v);
    };
    put("nu", c.constants.nu);
    put("gamma", c.constants.gamma);
    put("mu", c.constants.mu);
    put("lambda_max", c.constants.lambda_max);
    put("d_max", c.constants.d_max);
    put("rho_min", c.constants.rho_min);
    j["constants"] = k;
    if (c.sampling_budget) j["sampling_budget"] = *c.sampling_budget;
    return j;
}

Json condition_report_to_json(const ConditionReport& r)
{
    static const char* names[kConditionCount] = {"lssc",        "restricted_eigenvalue", "irrepresentability",
                                                 "beta_min",    "tau_bound",             "gradient_bound",
                                                 "neighborhood"};
    Json j;
    j["overall"] = r.overall;
    Json conds = Json::array();
    for (int i = 0; i < kConditionCount; ++i)
        conds.push_back({{"index", i + 1}, {"name", names[i]}, {"holds", r.verdicts[std::size_t(i)]},
                         {"dependent", r.dependent[std::size_t(i)]}});
    j["conditions"] = conds;
    j["lambda_min"] = number(r.lambda_min);
    j["alpha"] = r.alpha ? number(*r.alpha) : Json(nullptr);
    j["alpha_raw"] = number(r.alpha_raw);
    j["r_n"] = number(r.r_n);
    j["R_n"] = number(r.R_n);
    j["tau"] = number(r.tau);
    j["K"] = number(r.K);
    j["s"] = r.s;
    j["beta_min"] = number(r.beta_min);
    j["tau_bound_thm"] = number(r.tau_bound_thm);
    j["tau_bound_lemB4"] = number(r.tau_bound_lemB4);
    j["grad_inf_norm"] = number(r.grad_inf_norm);
    j["neighborhood_ok"] = r.neighborhood_ok;
    return j;
}

Json verification_to_json(const VerificationReport& r)
{
    Json j;
    j["schema"] = kSchemaVersion;
    j["model"] = r.model;
    j["K"] = number(r.K);
    j["empirical_max_ratio"] = number(r.empirical_max_ratio);
    j["n_delta"] = r.n_delta;
    j["n_dir"] = r.n_dir;
    j["seed"] = r.seed;
    j["pass"] = r.pass;
    j["resamples"] = r.resamples;
    j["probe_radius"] = number(r.probe_radius);
    if (r.witness) {
        j["witness"] = {{"j", r.witness->j},
                        {"ratio", number(r.witness->ratio)},
                        {"delta", encode_vector(r.witness->delta)},
                        {"u", encode_vector(r.witness->u)}};
    }
    return j;
}

Json tau_to_json(const TauRecommendation& t)
{
    Json j;
    j["tau"] = number(t.tau);
    j["rate"] = tau_rate_name(t.rate);
    j["C"] = number(t.C);
    j["failure_bound"] = number(t.failure_bound);
    j["raw_exponent"] = number(t.raw_exponent);
    j["window_ok"] = t.window_ok;
    return j;
}

} // namespace sparsist::io

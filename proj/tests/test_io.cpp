#include "sparsist/io.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>

using namespace sparsist;
using namespace sparsist::io;

namespace {

std::vector<unsigned char> bytes_of(const std::string& s)
{
    return {s.begin(), s.end()};
}

Json linear_config()
{
    return Json::parse(R"({"schema": 1, "model": {"name": "linear", "c": 0.5}, "design": "gaussian_iid",
                           "n": 30, "p": 8, "s": 2, "beta_min": 1, "beta_max": 2, "seed": 4})");
}

} // namespace

TEST_CASE("base64")
{
    CHECK(base64_encode(bytes_of("")) == "");
    CHECK(base64_encode(bytes_of("f")) == "Zg==");
    CHECK(base64_encode(bytes_of("fo")) == "Zm8=");
    CHECK(base64_encode(bytes_of("foobar")) == "Zm9vYmFy");
    CHECK(base64_decode("Zm9vYmE=") == bytes_of("fooba"));

    std::mt19937_64 rng(1);
    for (std::size_t len = 0; len < 40; ++len) {
        std::vector<unsigned char> b(len);
        for (auto& c : b) c = static_cast<unsigned char>(rng() & 255);
        CHECK(base64_decode(base64_encode(b)) == b);
    }
    CHECK_THROWS_AS(base64_decode("abc"), ConfigError);
    CHECK_THROWS_AS(base64_decode("ab!d"), ConfigError);
    CHECK_THROWS_AS(base64_decode("a=bc"), ConfigError);
}

TEST_CASE("matrix encoding is row-major little-endian")
{
    MatrixXd m(2, 3);
    m << 1, 2, 3, 4, 5, 6;
    const Json j = encode_matrix(m);
    CHECK(j["shape"] == Json::array({2, 3}));
    const auto raw = base64_decode(j["data"].get<std::string>());
    REQUIRE(raw.size() == 48);
    double second = 0;
    std::memcpy(&second, raw.data() + 8, 8);
    CHECK(second == 2.0);
    CHECK(raw[8 + 7] == 0x40); // high byte of 2.0 comes last
    CHECK(decode_matrix(j) == m);

    VectorXd v(3);
    v << -0.0, 1e-300, std::numeric_limits<double>::infinity();
    const VectorXd back = decode_vector(encode_vector(v));
    CHECK(std::memcmp(back.data(), v.data(), 24) == 0);
    CHECK_THROWS_AS(decode_vector(j), ConfigError);
    Json bad = j;
    bad["shape"] = Json::array({2, 2});
    CHECK_THROWS_AS(decode_matrix(bad), ConfigError);
}

TEST_CASE("non-finite numbers")
{
    CHECK(number(infinity<double>()) == "inf");
    CHECK(number(-infinity<double>()) == "-inf");
    CHECK(number(std::nan("")) == "nan");
    CHECK(number(0.25) == 0.25);
    CHECK(std::isinf(read_number(Json("inf"))));
    CHECK(std::isnan(read_number(Json("nan"))));
    CHECK(read_number(Json(3)) == 3.0);
    CHECK_THROWS_AS(read_number(Json("three")), ConfigError);
}

TEST_CASE("strict config parsing")
{
    const auto cfg = instance_config_from_json(linear_config());
    CHECK(cfg.n == 30);
    CHECK(std::get<LinearModel>(cfg.model).c == 0.5);
    CHECK(cfg.seed == 4);

    Json extra = linear_config();
    extra["colour"] = "blue";
    try {
        instance_config_from_json(extra);
        FAIL("unknown field accepted");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("colour") != std::string::npos);
    }

    Json schema = linear_config();
    schema["schema"] = 2;
    try {
        instance_config_from_json(schema);
        FAIL("schema mismatch accepted");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("expected version 1") != std::string::npos);
    }

    Json no_seed = linear_config();
    no_seed.erase("seed");
    CHECK_THROWS_AS(instance_config_from_json(no_seed), ConfigError);

    Json bad_model = linear_config();
    bad_model["model"]["c"] = -1;
    CHECK_THROWS_AS(instance_config_from_json(bad_model), ConfigError);
    bad_model["model"] = {{"name", "poisson"}};
    CHECK_THROWS_AS(instance_config_from_json(bad_model), ConfigError);

    Json nested = linear_config();
    nested["model"]["shape"] = 2;
    CHECK_THROWS_AS(instance_config_from_json(nested), ConfigError);

    CHECK_THROWS_AS(parse_json("{\"schema\": 1,", "inline"), ConfigError);
    CHECK(instance_config_from_json(instance_config_to_json(cfg)).seed == cfg.seed);
}

TEST_CASE("instance round trip")
{
    for (const char* text : {R"({"name": "linear", "c": 0.5})", R"({"name": "logistic"})", R"({"name": "gamma", "k": 2})",
                             R"({"name": "graph"})"}) {
        Json c = linear_config();
        c["model"] = Json::parse(text);
        if (c["model"]["name"] == "graph") {
            c["p"] = 4;
            c["s"] = 2;
            c.erase("design");
        }
        const Instance a = make_instance(instance_config_from_json(c));
        const Instance b = instance_from_json(parse_json(instance_to_json(a).dump(), "round trip"));
        INFO(text);
        CHECK(b.X == a.X);
        CHECK(b.y == a.y);
        CHECK(b.sigma_hat == a.sigma_hat);
        CHECK(b.truth.beta == a.truth.beta);
        CHECK(b.truth.S == a.truth.S);
        CHECK(model_to_json(b.model) == model_to_json(a.model));
        CHECK(b.oracle().value(b.truth.beta) == a.oracle().value(a.truth.beta));
    }

    const Instance inst = make_instance(instance_config_from_json(linear_config()));
    Json j = instance_to_json(inst);
    j["support"] = Json::array({0});
    CHECK_THROWS_AS(instance_from_json(j), ConfigError);
}

TEST_CASE("report serialization")
{
    ConditionReport r;
    r.r_n = infinity<double>();
    r.verdicts[1] = true;
    const Json j = condition_report_to_json(r);
    CHECK(j["r_n"] == "inf");
    CHECK(j["alpha"].is_null());
    CHECK(j["conditions"].size() == 7);
    CHECK(j["conditions"][1]["holds"] == true);
    CHECK(j["conditions"][1]["index"] == 2);

    LsscCertificate c;
    c.K = 16;
    c.neighborhood = Neighborhood::frobenius_symmetric(0.5);
    c.constants.rho_min = 1;
    const Json cj = certificate_to_json(c);
    CHECK(cj["neighborhood"]["shape"] == "frobenius_ball_symmetric");
    CHECK(cj["constants"]["rho_min"] == 1.0);
    CHECK(certificate_to_json(LsscCertificate{})["neighborhood"]["radius"] == "inf");
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>

#include "sbc/config.hpp"

using namespace sbc;

TEST_CASE("parse flat key-value text") {
    const auto m = ConfigMap::parse_string(
        "# a comment\n"
        "problem.T = 2.0\n"
        "noise.n_modes= 4   # trailing comment\n"
        "\n"
        "study.mesh_levels = 2,4,8\n");
    CHECK(m.kv.at("problem.T") == "2.0");
    CHECK(m.kv.at("noise.n_modes") == "4");
    CHECK(m.kv.at("study.mesh_levels") == "2,4,8");
    CHECK_THROWS_AS(ConfigMap::parse_string("no equals sign"), ConfigError);
    CHECK_THROWS_AS(ConfigMap::parse_string("= 3"), ConfigError);
}

TEST_CASE("resolve with defaults and overrides") {
    const auto m = ConfigMap::parse_string("problem.J = 8\ncontrol.nu = 0.5\n");
    const RunConfig c = resolve_config(m);
    CHECK(c.J == 8);
    CHECK(c.nu == 0.5);
    CHECK(c.T == 1.0);          // default
    CHECK(c.n_modes == 8);      // default
    CHECK(c.mesh_ref == 64);    // default
}

TEST_CASE("unknown keys: strict rejects, lax warns") {
    const auto m = ConfigMap::parse_string("problem.J = 8\nnot.a.key = 1\n");
    CHECK_THROWS_AS(resolve_config(m, true), ConfigError);
    std::vector<std::string> warnings;
    const RunConfig c = resolve_config(m, false, &warnings);
    CHECK(c.J == 8);
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].find("not.a.key") != std::string::npos);
}

TEST_CASE("validation errors quote the offending keys") {
    const auto m = ConfigMap::parse_string("control.lower = 1\ncontrol.upper = 0\n");
    try {
        resolve_config(m);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        const std::string what = e.what();
        CHECK(what.find("control.lower") != std::string::npos);
        CHECK(what.find("control.upper") != std::string::npos);
    }
    CHECK_THROWS_AS(resolve_config(ConfigMap::parse_string("problem.J = nope\n")), ConfigError);
    CHECK_THROWS_AS(resolve_config(ConfigMap::parse_string("tree.m = 5\n")), ConfigError);
    CHECK_THROWS_AS(resolve_config(ConfigMap::parse_string("ce.kind = magic\n")), ConfigError);
    CHECK_THROWS_AS(resolve_config(ConfigMap::parse_string("noise.samples = 0\n")), ConfigError);
}

TEST_CASE("resolved config round-trips: parse -> serialize -> parse fixpoint") {
    const auto m = ConfigMap::parse_string(
        "problem.J = 12\n"
        "noise.lambda_exponent = 3.5\n"
        "study.j_levels = 4,8,16\n"
        "control.tol = 1e-9\n");
    const RunConfig c1 = resolve_config(m);
    const std::string s1 = c1.serialize();
    const RunConfig c2 = resolve_config(ConfigMap::parse_string(s1));
    const std::string s2 = c2.serialize();
    CHECK(s1 == s2);
    CHECK(c2.J == 12);
    CHECK(c2.lambda_exponent == 3.5);
    CHECK(c2.j_levels == std::vector<int>{4, 8, 16});
    CHECK(c2.tol == 1e-9);
}

#include "helpers.hpp"

#include "membrane/config.hpp"
#include "membrane/errors.hpp"
#include "membrane/io.hpp"
#include "membrane/runner.hpp"

#include <doctest.h>

#include <algorithm>
#include <filesystem>

using namespace membrane;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path config(const std::string& name) { return fs::path(MEMBRANE_CONFIG_DIR) / (name + ".json"); }

fs::path scratch(const std::string& name) {
    const auto p = fs::path(MEMBRANE_TEST_TMP) / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

fs::path write_config(const std::string& name, const json& j) {
    const auto p = fs::path(MEMBRANE_TEST_TMP) / (name + ".json");
    fs::create_directories(p.parent_path());
    io::write_text(p, j.dump(2));
    return p;
}

} // namespace

TEST_CASE("solve on a single cell") {
    auto out = run({"solve", config("one_cell_solve"), scratch("one_cell"), std::nullopt});
    CHECK(out.exit_code == kExitOk);
    CHECK(out.manifest["energy"].get<double>() == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(std::count(out.artifacts.begin(), out.artifacts.end(), "u.csv") == 1);
    CHECK(fs::exists(out.out_dir / "manifest.json"));
    const auto m = json::parse(io::read_text(out.out_dir / "manifest.json"));
    CHECK(m["subcommand"] == "solve");
    CHECK(m["domain"]["cells"] == 1);
}

TEST_CASE("check on the disk reports A1 but not A2") {
    auto out = run({"check", config("disk_check"), scratch("disk_check"), std::nullopt});
    CHECK(out.exit_code == kExitOk);
    CHECK(out.manifest["a1"]["holds"] == true);
    CHECK(out.manifest["a2"]["holds"] == false);
    CHECK(out.manifest["max_vf"].get<double>() == doctest::Approx(0.25).epsilon(0.02));
}

TEST_CASE("repeated runs produce identical artifacts") {
    auto a = run({"multistart", config("square_multistart"), scratch("det_a"), std::nullopt});
    auto b = run({"multistart", config("square_multistart"), scratch("det_b"), std::nullopt});
    REQUIRE(a.artifacts == b.artifacts);
    for (const auto& name : a.artifacts) {
        if (name == "manifest.json")
            continue;
        INFO(name);
        CHECK(io::read_text(a.out_dir / name) == io::read_text(b.out_dir / name));
    }
    CHECK(a.manifest["run_id"] == b.manifest["run_id"]);
    auto c = run({"multistart", config("square_multistart"), scratch("det_c"), std::uint64_t{7}});
    CHECK(c.manifest["run_id"] != a.manifest["run_id"]);
}

TEST_CASE("shape mask written to disk reads back as the reported set") {
    auto out = run({"shape", config("disk_shape"), scratch("shape"), std::nullopt});
    CHECK(out.exit_code == kExitOk);
    auto d = build_domain(load_config(config("disk_shape")).domain);
    auto mask = io::read_mask_pgm(d, out.out_dir / "mask.pgm");
    CHECK(mask.size() == out.manifest["shape"]["set_cells"].get<std::size_t>());
    auto g = io::read_field_csv(d, out.out_dir / "g.csv");
    for (std::size_t c = 0; c < d->size(); ++c)
        CHECK((g[c] == 1.0) == mask.contains(c));
}

TEST_CASE("configuration failures map to exit code 2") {
    CHECK_THROWS_AS(run({"nope", config("one_cell_solve"), scratch("bad"), std::nullopt}), ConfigError);
    auto j = json::parse(io::read_text(config("one_cell_solve")));
    j["domain"]["colour"] = "red";
    try {
        run({"solve", write_config("bad_key", j), scratch("bad"), std::nullopt});
        FAIL("expected a configuration error");
    } catch (const std::exception& e) {
        CHECK(exit_code_for(e) == kExitConfig);
    }
    // shape needs a two-material generator
    try {
        run({"shape", config("disk_minimize"), scratch("bad"), std::nullopt});
        FAIL("expected a configuration error");
    } catch (const std::exception& e) {
        CHECK(exit_code_for(e) == kExitConfig);
    }
}

TEST_CASE("a failed theorem check maps to exit code 4") {
    json j = {{"domain", {{"shape", "disk"}, {"radius", 1}, {"resolution", 16}}},
              {"force", {{"kind", "constant"}, {"value", 1}}},
              {"generator", {{"kind", "two_material"}, {"alpha", 1}, {"beta", 0}}},
              {"sweep", {{"gamma_fractions", {0.2, 0.3, 0.4}}, {"derivative_tolerance", 1e-9}}}};
    auto out = run({"sweep-gamma", write_config("tight", j), scratch("tight"), std::nullopt});
    CHECK(out.exit_code == kExitCheck);
    j["sweep"]["derivative_tolerance"] = 0.5;
    out = run({"sweep-gamma", write_config("loose", j), scratch("loose"), std::nullopt});
    CHECK(out.exit_code == kExitOk);
}

TEST_CASE("solver failures map to exit code 3") {
    CHECK(exit_code_for(SolverError("no convergence", 1.0)) == kExitSolver);
}

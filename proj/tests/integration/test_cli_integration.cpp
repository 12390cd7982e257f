#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "taskenc/text_io.hpp"

#include <nlohmann/json.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <set>
#include <string>

namespace fs = std::filesystem;
using json = nlohmann::json;
using taskenc::text::read_file;
using taskenc::text::read_lines;
using taskenc::text::split_csv_line;
using taskenc::text::write_file;

namespace {

const fs::path kWork = fs::temp_directory_path() / "taskenc_integration";

int run(const std::string& args) {
    const std::string cmd = std::string(TASKENC_BIN) + " " + args + " >" + (kWork / "last.log").string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path fresh(const std::string& name) {
    const auto p = kWork / name;
    fs::remove_all(p);
    return p;
}

fs::path write_json(const std::string& name, const json& j) {
    fs::create_directories(kWork);
    const auto p = kWork / name;
    write_file(p, j.dump(2));
    return p;
}

fs::path synth(const std::string& name, const json& cfg) {
    const auto out = fresh(name);
    REQUIRE(run("synth --config " + write_json(name + ".json", cfg).string() + " --out " + out.string()) == 0);
    return out;
}

json run_config(const fs::path& dataset, const json& extra = json::object()) {
    json j = {{"dataset", dataset.string()},
              {"grid", {{"lambda", {0.01, 1.0, 100.0}}, {"lambda_attention", {0.1, 10.0}}}},
              {"solver", {{"max_epochs", 200}}},
              {"save_models", false}};
    for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
    return j;
}

std::size_t count_rows(const fs::path& csv, const std::string& column, const std::string& value) {
    const auto lines = read_lines(csv);
    const auto header = split_csv_line(lines.at(0));
    std::size_t col = 0;
    while (col < header.size() && header[col] != column) ++col;
    REQUIRE(col < header.size());
    std::size_t n = 0;
    for (std::size_t i = 1; i < lines.size(); ++i)
        if (split_csv_line(lines[i]).at(col) == value) ++n;
    return n;
}

} // namespace

TEST_CASE("synth writes a dataset deterministically") {
    const json cfg = {{"kind", "H1"}, {"n_words", 4}, {"n_questions", 3}, {"f_s", 3}, {"f_t", 2},
                      {"n_sensors", 2}, {"n_windows", 2}, {"noise_sigma", 0.1}};
    const auto a = synth("tiny_a", cfg);
    const auto b = synth("tiny_b", cfg);
    for (const char* f : {"meta.json", "data.f64le", "design.csv", "stimulus.csv", "task.csv",
                          "aux_questions.csv", "truth.json"}) {
        REQUIRE(fs::exists(a / f));
        CHECK(read_file(a / f) == read_file(b / f));
    }
    const auto bad = write_json("bad_kind.json", {{"kind", "H7"}});
    CHECK(run("synth --config " + bad.string() + " --out " + fresh("bad").string()) == 1);
    CHECK(run("synth --config " + (kWork / "missing.json").string() + " --out " + fresh("bad").string()) == 2);
    CHECK(run("synth --out x") == 1);
}

TEST_CASE("run on additive data ranks the additive model first") {
    const auto data = synth("h3", {{"kind", "H3"}, {"noise_sigma", 0.5}, {"noise_relative", true}, {"seed", 3}});
    const auto out = fresh("h3_run");
    auto cfg = run_config(data, {{"folds", {{"n_folds", 20}}}, {"save_models", true}});
    REQUIRE(run("run --config " + write_json("h3_run.json", cfg).string() + " --out " + out.string() +
                " --threads 4") == 0);
    const auto summary = json::parse(read_file(out / "summary.json"));
    CHECK(summary["ranking"][0]["hypothesis"] == "H3");
    CHECK(summary["hypotheses"].size() == 5);
    CHECK(summary.contains("fold_manifest_hash"));
    CHECK(summary["decisions"].contains("tie_credit"));
    for (const char* f : {"results.csv", "accuracy_timecourse.csv", "accuracy_grid.csv", "stats.csv", "folds.json",
                          "timecourse.svg", "grid.svg", "fold_accuracy.csv"}) {
        CHECK(fs::exists(out / f));
    }
    CHECK(fs::exists(out / "models" / "h3" / "H42" / "model.json"));

    SUBCASE("attention report") {
        const auto h41 = out / "models" / "h3" / "H41";
        const auto rep = fresh("attention");
        REQUIRE(run("attention " + h41.string() + " " + h41.string() + " --k 5 --out " + rep.string()) == 0);
        const auto sim = read_lines(rep / "attention_similarity.csv");
        REQUIRE(sim.size() == 2);
        CHECK(std::stod(split_csv_line(sim[1]).at(2)) == doctest::Approx(1.0));
        CHECK(count_rows(rep / "top_features.csv", "task_id", "q00") == 2 * 5);
        CHECK(run("attention " + (out / "models" / "h3" / "H1").string() + " --out " + rep.string()) == 1);
        REQUIRE(run("attention " + h41.string() + " " + (out / "models" / "h3" / "H42").string() + " --aux " +
                    (data / "aux_questions.csv").string() + " --out " + rep.string()) == 0);
    }
}

TEST_CASE("single hypothesis run emits no pairwise statistics") {
    const auto data = synth("h1", {{"kind", "H1"}, {"noise_sigma", 0.5}, {"noise_relative", true}, {"f_s", 6}});
    const auto out = fresh("h1_run");
    REQUIRE(run("run --config " + write_json("h1_run.json", run_config(data)).string() + " --out " + out.string() +
                " --hypotheses H1 --learning-curve 20,60") == 0);
    for (const auto& line : read_lines(out / "stats.csv")) CHECK(line.rfind("pair:", 0) == std::string::npos);
    CHECK(count_rows(out / "accuracy_timecourse.csv", "hypothesis", "H1") > 0);
    CHECK(count_rows(out / "accuracy_timecourse.csv", "hypothesis", "H3") == 0);
    CHECK(count_rows(out / "learning_curve.csv", "size", "60") == 1);
    CHECK(run("run --config " + write_json("h1_bad.json", run_config(data)).string() + " --out " + out.string() +
              " --learning-curve 0") == 1);
}

TEST_CASE("compare") {
    const auto data = synth("words6", {{"kind", "H1"},
                                       {"noise_sigma", 1.0},
                                       {"noise_relative", true},
                                       {"n_subjects", 6},
                                       {"f_s", 8},
                                       {"seed", 5}});
    const auto cfg = write_json("words6.json", run_config(data));
    const auto h3 = fresh("cmp_h3"), h2 = fresh("cmp_h2"), h1 = fresh("cmp_h1");
    REQUIRE(run("run --config " + cfg.string() + " --out " + h3.string() + " --hypotheses H3") == 0);
    REQUIRE(run("run --config " + cfg.string() + " --out " + h2.string() + " --hypotheses H2") == 0);
    REQUIRE(run("run --config " + cfg.string() + " --out " + h1.string() + " --hypotheses H1") == 0);

    SUBCASE("a result set against itself") {
        const auto out = fresh("cmp_self");
        REQUIRE(run("compare " + h3.string() + " " + h3.string() + " --out " + out.string()) == 0);
        CHECK(count_rows(out / "comparison.csv", "rejected", "1") == 0);
    }
    SUBCASE("additive beats task-only on word-driven data") {
        const auto out = fresh("cmp_32");
        REQUIRE(run("compare " + h3.string() + " " + h2.string() + " --out " + out.string()) == 0);
        CHECK(count_rows(out / "comparison.csv", "rejected", "1") >= 1);
        CHECK(fs::exists(out / "comparison.svg"));
    }
    SUBCASE("three sets give three families") {
        const auto out = fresh("cmp_3");
        REQUIRE(run("compare " + h1.string() + " " + h2.string() + " " + h3.string() + " --out " + out.string()) == 0);
        std::set<std::string> families;
        const auto lines = read_lines(out / "comparison.csv");
        for (std::size_t i = 1; i < lines.size(); ++i) families.insert(split_csv_line(lines[i]).at(0));
        CHECK(families.size() == 3);
    }
    SUBCASE("different folds are refused") {
        const auto other = fresh("cmp_other");
        REQUIRE(run("run --config " + cfg.string() + " --out " + other.string() + " --hypotheses H2 --seed 9") == 0);
        CHECK(run("compare " + h3.string() + " " + other.string() + " --out " + fresh("cmp_bad").string()) == 1);
    }
}

TEST_CASE("exit codes and ingest-check") {
    const auto data = synth("ingest", {{"kind", "H2"}, {"n_words", 6}, {"n_questions", 4}, {"f_s", 3}, {"f_t", 3}});
    CHECK(run("ingest-check " + data.string()) == 0);
    CHECK(read_file(kWork / "last.log").find("24 trials") != std::string::npos);
    CHECK(run("ingest-check " + (kWork / "nowhere").string()) == 2);

    SUBCASE("unknown config key is a configuration error") {
        auto cfg = run_config(data);
        cfg["bogus"] = 1;
        CHECK(run("run --config " + write_json("bogus.json", cfg).string() + " --out " + fresh("x").string()) == 1);
    }
    SUBCASE("a zero auxiliary question is a numeric failure") {
        const auto broken = fresh("zero_aux");
        fs::copy(data, broken, fs::copy_options::recursive);
        auto lines = read_lines(broken / "aux_questions.csv");
        auto cells = split_csv_line(lines[1]);
        std::string row = cells[0];
        for (std::size_t i = 1; i < cells.size(); ++i) row += ",0";
        lines[1] = row;
        std::string text;
        for (const auto& l : lines) text += l + "\n";
        write_file(broken / "aux_questions.csv", text);
        auto cfg = run_config(broken, {{"hypotheses", {"H41"}}});
        CHECK(run("run --config " + write_json("zero_aux.json", cfg).string() + " --out " + fresh("y").string()) == 3);
    }
    SUBCASE("a truncated recording is a data error") {
        const auto broken = fresh("short_data");
        fs::copy(data, broken, fs::copy_options::recursive);
        fs::resize_file(broken / "data.f64le", fs::file_size(broken / "data.f64le") - 8);
        CHECK(run("ingest-check " + broken.string()) == 2);
    }
}

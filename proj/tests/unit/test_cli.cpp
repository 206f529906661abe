#include <doctest.h>

#include <httplib.h>

#include <csignal>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "csn/bundle.hpp"
#include "csn/exports.hpp"
#include "csn/query.hpp"
#include "fixtures.hpp"

extern char** environ;

using namespace csn;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
    int code = -1;
    std::string out;
    std::string err;
};

std::string shell_quote(const std::string& s) {
    std::string q = "'";
    for (char c : s) q += c == '\'' ? std::string("'\\''") : std::string(1, c);
    return q + "'";
}

Run csn_run(const std::vector<std::string>& args) {
    static testing::TempDir scratch("csn-cli");
    const auto err_path = scratch / "stderr.txt";
    std::string cmd = shell_quote(CSN_BINARY);
    for (const auto& a : args) cmd += " " + shell_quote(a);
    cmd += " 2>" + shell_quote(err_path.string());
    Run r;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    char buf[4096];
    std::size_t n;
    while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.err = testing::read_text(err_path);
    return r;
}

json error_line(const Run& r) {
    REQUIRE(!r.err.empty());
    REQUIRE(r.err.find('\n') == r.err.size() - 1);
    return json::parse(r.err);
}

struct Shared {
    testing::TempDir tmp;
    fs::path bundle;
    Shared() { bundle = testing::build_demo_bundle(tmp.path()); }
};

Shared& shared() {
    static Shared s;
    return s;
}

}  // namespace

TEST_CASE("ingest subcommand builds a bundle and reports errors as json") {
    testing::TempDir tmp;
    const auto in = testing::write_demo_inputs(tmp.path(), 24);
    auto config = json::parse(testing::read_text(in.config));
    config["projections"] = json::array({{{"method", "pca"}, {"name", "pca"}}});
    std::ofstream(in.config) << config.dump();

    auto r = csn_run({"ingest", "--config", in.config.string(), "--out", (tmp / "b").string()});
    CHECK(r.code == 0);
    CHECK(r.err.empty());
    CHECK(json::parse(r.out)["objects"] == 24);
    CHECK(load_manifest(tmp / "b").object_count == 24);

    r = csn_run({"ingest", "--config", (tmp / "missing.json").string(), "--out", (tmp / "c").string()});
    CHECK(r.code == 3);
    CHECK(error_line(r)["error"]["kind"] == "io");

    std::ofstream(in.images / "img_004.png") << "garbage";
    r = csn_run({"ingest", "--config", in.config.string(), "--out", (tmp / "d").string()});
    CHECK(r.code != 0);
    CHECK(error_line(r)["error"]["message"].get<std::string>().find("object 4") != std::string::npos);

    r = csn_run({"ingest", "--out", (tmp / "e").string()});
    CHECK(r.code == 2);
    CHECK(error_line(r)["error"]["kind"] == "usage");
}

TEST_CASE("query subcommand prints matching indices") {
    const auto& b = shared().bundle;
    auto r = csn_run({"query", "--bundle", b.string(), "--q", "style == \"Cubism\""});
    CHECK(r.code == 0);
    const auto bundle = load_bundle(b);
    const auto mask = query::evaluate(query::parse("style == \"Cubism\""), bundle.metadata, bundle.size());
    std::string expected;
    for (auto i : mask.indices()) expected += std::to_string(i) + "\n";
    CHECK(r.out == expected);
    CHECK(mask.count() == 25);

    r = csn_run({"query", "--bundle", b.string()});
    CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 100);

    r = csn_run({"query", "--bundle", b.string(), "--q", "style == (", "--ranges", "[]"});
    CHECK(r.code == 2);
    CHECK(error_line(r)["error"]["kind"] == "invalid_argument");
    r = csn_run({"query", "--bundle", b.string(), "--ranges", "[{\"dimension\":\"zz\",\"lo\":0,\"hi\":1}]"});
    CHECK(r.code == 2);
    r = csn_run({"query", "--bundle", (shared().tmp / "nowhere").string()});
    CHECK(r.code != 0);
    CHECK(error_line(r).contains("error"));
}

TEST_CASE("export subcommand writes csv and png") {
    const auto& b = shared().bundle;
    testing::TempDir tmp;
    const auto csv = tmp / "out.csv", png = tmp / "out.png";
    auto r = csn_run({"export", "--bundle", b.string(), "--q", "year >= 1900", "--csv", csv.string(), "--png",
                      png.string(), "--view", R"({"projection":"tsne","zoom":1.5})"});
    CHECK(r.code == 0);
    const auto bundle = load_bundle(b);
    const auto mask = query::evaluate(query::parse("year >= 1900"), bundle.metadata, bundle.size());
    CHECK(json::parse(r.out)["pass_count"] == mask.count());
    CHECK(testing::read_text(csv) == exports::export_csv(bundle.metadata, mask));

    exports::ViewState view;
    view.projection = "tsne";
    view.zoom = 1.5;
    CHECK(testing::read_bytes(png) ==
          exports::render_png(bundle.projection("tsne"), exports::Atlas::load(bundle), mask, view));

    r = csn_run({"export", "--bundle", b.string()});
    CHECK(r.code == 2);
    r = csn_run({"export", "--bundle", b.string(), "--png", png.string(), "--view", R"({"zoom":-1})"});
    CHECK(r.code == 2);
}

TEST_CASE("project subcommand registers a projection") {
    testing::TempDir tmp;
    fs::copy(shared().bundle, tmp / "b", fs::copy_options::recursive);
    const auto dir = tmp / "b";
    auto r = csn_run({"project", "--bundle", dir.string(), "--method", "axis", "--name", "years", "--x", "year", "--y",
                      "e1"});
    CHECK(r.code == 0);
    const auto j = json::parse(r.out);
    CHECK(j["projection"] == "years");
    CHECK(j["missing"] == json::array({17}));
    auto m = load_manifest(dir);
    REQUIRE(m.find_projection("years"));
    CHECK(load_bundle(dir).projection("years").x(17) == -1.0f);

    // Re-running replaces the entry instead of appending a duplicate.
    const auto count = m.projections.size();
    r = csn_run({"project", "--bundle", dir.string(), "--method", "pca", "--name", "years"});
    CHECK(r.code == 0);
    m = load_manifest(dir);
    CHECK(m.projections.size() == count);

    std::ofstream(tmp / "ext.csv") << "x,y\n";
    for (int i = 0; i < 100; ++i) std::ofstream(tmp / "ext.csv", std::ios::app) << i << "," << i * i << "\n";
    r = csn_run({"project", "--bundle", dir.string(), "--method", "import", "--name", "umap", "--path",
                 (tmp / "ext.csv").string()});
    CHECK(r.code == 0);
    const auto umap = load_bundle(dir).projection("umap");
    CHECK(umap.y(99) == 1.0f);
    CHECK(umap.y(0) == -1.0f);

    r = csn_run({"project", "--bundle", dir.string(), "--method", "umap"});
    CHECK(r.code == 2);
    r = csn_run({"project", "--bundle", dir.string(), "--method", "tsne", "--perplexity", "500"});
    CHECK(r.code == 2);
}

TEST_CASE("serve subcommand answers http until interrupted") {
    const auto& b = shared().bundle;
    int out_pipe[2];
    REQUIRE(pipe(out_pipe) == 0);
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);
    posix_spawn_file_actions_addclose(&actions, out_pipe[0]);
    std::string bin = CSN_BINARY;
    std::vector<std::string> args = {bin, "serve", "--bundles", b.string(), "--port", "0", "--host", "127.0.0.1"};
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);
    pid_t pid = 0;
    REQUIRE(posix_spawn(&pid, bin.c_str(), &actions, nullptr, argv.data(), environ) == 0);
    posix_spawn_file_actions_destroy(&actions);
    close(out_pipe[1]);

    std::string line;
    char c;
    while (read(out_pipe[0], &c, 1) == 1 && c != '\n') line += c;
    close(out_pipe[0]);
    const auto status_line = json::parse(line);
    CHECK(status_line["datasets"] == 1);
    const int port = status_line["port"];

    httplib::Client client("127.0.0.1", port);
    auto res = client.Get("/api/datasets");
    REQUIRE(res);
    CHECK(json::parse(res->body)[0]["id"] == "demo");
    res = client.Get("/api/datasets/demo/points/pca");
    REQUIRE(res);
    CHECK(res->body.size() == 800);

    kill(pid, SIGINT);
    int status = 0;
    waitpid(pid, &status, 0);
    CHECK(WIFEXITED(status));
    CHECK(WEXITSTATUS(status) == 0);
}

TEST_CASE("bench subcommand reports consistent timings") {
    const auto r = csn_run({"bench", "--objects", "5000", "--dimensions", "3", "--repetitions", "3"});
    CHECK(r.code == 0);
    const auto j = json::parse(r.out);
    CHECK(j["consistent"] == true);
    CHECK(j["cold_ms_median"].get<double>() >= 0.0);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

class Workdir {
public:
    Workdir() {
        dir_ = fs::temp_directory_path() / ("threatlang_cli_" + std::to_string(::getpid()));
        fs::create_directories(dir_);
    }
    ~Workdir() { std::error_code ec; fs::remove_all(dir_, ec); }

    fs::path path(const std::string& name) const { return dir_ / name; }

    void write(const std::string& name, const std::string& content) {
        std::ofstream out(path(name), std::ios::binary);
        out << content;
    }

    RunResult run(const std::string& args, const std::string& env_prefix = "") const {
        fs::path out = dir_ / "stdout.txt";
        fs::path err = dir_ / "stderr.txt";
        std::string cmd = env_prefix + std::string(THREATLANG_BIN) + " " + args + " > " +
                          out.string() + " 2> " + err.string();
        int status = std::system(cmd.c_str());
        int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
        return {code, slurp(out), slurp(err)};
    }

private:
    fs::path dir_;
};

const char* kLang = R"(
asset Network {
  | access [Exponential(1)] -> hosts.exploit
}
asset Host {
  & exploit [Gamma(2,1.5)] -> root
  | root
  # patching [Bernoulli(0.5)] -> exploit
}
assoc NetHosts [Network 1] net <-> [Host 0..*] hosts
)";

const char* kModel = R"({
  "instances": [
    {"id": "n1", "asset": "Network"},
    {"id": "h1", "asset": "Host"},
    {"id": "h2", "asset": "Host"}
  ],
  "links": [
    {"association": "NetHosts", "left": "n1", "right": "h1"},
    {"association": "NetHosts", "left": "n1", "right": "h2"}
  ],
  "entries": ["n1.access"],
  "targets": ["h1.root"],
  "impacts": {"h1.root": 4}
})";

} // namespace

TEST_CASE("compile writes a graph and exits zero") {
    Workdir w;
    w.write("corp.tl", kLang);
    w.write("model.json", kModel);
    RunResult r = w.run("compile --lang " + w.path("corp.tl").string() + " --model " +
                        w.path("model.json").string() + " --out " + w.path("g.json").string());
    CHECK(r.exit_code == 0);
    CHECK(fs::exists(w.path("g.json")));
    CHECK(slurp(w.path("g.json")).find("n1.access") != std::string::npos);
}

TEST_CASE("usage errors exit 2 with usage text") {
    Workdir w;
    RunResult r = w.run("simulate --graph g.json --speed 9");
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("--speed") != std::string::npos);
    CHECK(r.err.find("Usage") != std::string::npos);

    RunResult missing = w.run("simulate --speed 9");
    CHECK(missing.exit_code == 2);

    RunResult none = w.run("");
    CHECK(none.exit_code == 2);
}

TEST_CASE("domain errors exit 1 and leave no partial outputs") {
    Workdir w;
    w.write("empty_entries.json", R"json({
      "steps": [{"id": "a", "kind": "OR", "ttc": "Constant(1)"}],
      "defenses": [], "edges": []
    })json");
    RunResult r = w.run("simulate --graph " + w.path("empty_entries.json").string() +
                        " --trials 10 --seed 1 --out " + w.path("r.json").string());
    CHECK(r.exit_code == 1);
    CHECK(r.err.find("entry") != std::string::npos);
    CHECK(!fs::exists(w.path("r.json")));

    w.write("corp.tl", kLang);
    w.write("bad_model.json", R"({"instances":[{"id":"x","asset":"Mainframe"}]})");
    RunResult c = w.run("compile --lang " + w.path("corp.tl").string() + " --model " +
                        w.path("bad_model.json").string() + " --out " + w.path("g.json").string());
    CHECK(c.exit_code == 1);
    CHECK(!fs::exists(w.path("g.json")));
}

TEST_CASE("simulate output is byte-stable across reruns and worker counts") {
    Workdir w;
    w.write("corp.tl", kLang);
    w.write("model.json", kModel);
    REQUIRE(w.run("compile --lang " + w.path("corp.tl").string() + " --model " +
                  w.path("model.json").string() + " --out " + w.path("g.json").string())
                .exit_code == 0);

    std::string base = "simulate --graph " + w.path("g.json").string() + " --trials 200 --seed 99";
    REQUIRE(w.run(base + " --workers 1 --out " + w.path("r1.json").string()).exit_code == 0);
    REQUIRE(w.run(base + " --workers 8 --out " + w.path("r8.json").string()).exit_code == 0);
    REQUIRE(w.run(base + " --workers 1 --out " + w.path("r1b.json").string()).exit_code == 0);
    REQUIRE(w.run(base + " --out " + w.path("renv.json").string(), "THREATLANG_WORKERS=4 ")
                .exit_code == 0);
    std::string r1 = slurp(w.path("r1.json"));
    CHECK(r1 == slurp(w.path("r8.json")));
    CHECK(r1 == slurp(w.path("r1b.json")));
    CHECK(r1 == slurp(w.path("renv.json")));
    CHECK(r1.find("\"rng_mixer\"") != std::string::npos);

    REQUIRE(w.run(base + " --workers 1 --summary " + w.path("s.csv").string() + " --out " +
                  w.path("r1c.json").string())
                .exit_code == 0);
    std::string csv = slurp(w.path("s.csv"));
    CHECK(csv.rfind("step,mean,reach_fraction,p05,p50,p95\n", 0) == 0);
}

TEST_CASE("analyze and export subcommands") {
    Workdir w;
    w.write("corp.tl", kLang);
    w.write("model.json", kModel);
    REQUIRE(w.run("compile --lang " + w.path("corp.tl").string() + " --model " +
                  w.path("model.json").string() + " --out " + w.path("g.json").string())
                .exit_code == 0);
    std::string g = w.path("g.json").string();

    RunResult cp = w.run("analyze --graph " + g + " --report critical-path --target h1.root");
    CHECK(cp.exit_code == 0);
    CHECK(cp.out.find("n1.access") != std::string::npos);

    RunResult cut = w.run("analyze --graph " + g + " --report min-cut --target h1.root --mode exact");
    CHECK(cut.exit_code == 0);
    CHECK(cut.out.find("h1.patching") != std::string::npos);

    RunResult risk = w.run("analyze --graph " + g + " --report risk --horizon 30 --trials 2000");
    CHECK(risk.exit_code == 0);
    CHECK(risk.out.find("cells") != std::string::npos);

    RunResult steps =
        w.run("analyze --graph " + g + " --report critical-steps --target h1.root --trials 500");
    CHECK(steps.exit_code == 0);
    CHECK(steps.out.find("frequency") != std::string::npos);

    RunResult dot = w.run("export --graph " + g + " --format dot");
    CHECK(dot.exit_code == 0);
    CHECK(dot.out.find("shape=ellipse") != std::string::npos);
    CHECK(dot.out.find("shape=box") != std::string::npos);
    CHECK(dot.out.find("shape=triangle") != std::string::npos);

    RunResult state = w.run("export --graph " + g + " --format dot --view state --cap 500");
    CHECK(state.exit_code == 0);
    CHECK(state.out.find("root") != std::string::npos);

    RunResult bad = w.run("export --graph " + g + " --format yaml");
    CHECK(bad.exit_code == 1);
}

TEST_CASE("grammar and ingest subcommands") {
    Workdir w;
    w.write("pairs.sg", R"(terminals A C G U
start s
0.25 s -> A w1 U
0.25 s -> C w1 G
0.25 s -> G w1 C
0.25 s -> U w1 A
0.1 w1 -> A w2 U
0.4 w1 -> C w2 G
0.4 w1 -> G w2 C
0.1 w1 -> U w2 A
0.25 w2 -> A w3 U
0.25 w2 -> C w3 G
0.25 w2 -> G w3 C
0.25 w2 -> U w3 A
0.8 w3 -> G A A A
0.2 w3 -> G C A A
)");
    RunResult prob = w.run("grammar prob --grammar " + w.path("pairs.sg").string() +
                           " --input AAGGAAACUU");
    CHECK(prob.exit_code == 0);
    CHECK(prob.out.find("0.005") != std::string::npos);

    RunResult parse = w.run("grammar parse --grammar " + w.path("pairs.sg").string() +
                            " --input AAGGAAACUU --strategy bottom-up");
    CHECK(parse.exit_code == 0);
    CHECK(parse.out.find("\"tree_count\": 1") != std::string::npos);

    RunResult s1 = w.run("grammar sample --grammar " + w.path("pairs.sg").string() + " --seed 5");
    RunResult s2 = w.run("grammar sample --grammar " + w.path("pairs.sg").string() + " --seed 5");
    CHECK(s1.exit_code == 0);
    CHECK(s1.out == s2.out);

    w.write("catalog.json", R"({"name":"demo","techniques":[
      {"id":"T1","name":"Foothold"},
      {"id":"T2","name":"Escalate","prerequisites":["T1"],
       "mitigations":[{"id":"M1","name":"Patch"}]}]})");
    RunResult ing = w.run("ingest --catalog " + w.path("catalog.json").string() +
                          " --asset Corp --out " + w.path("corp_gen.tl").string());
    CHECK(ing.exit_code == 0);
    std::string gen = slurp(w.path("corp_gen.tl"));
    CHECK(gen.find("| Foothold -> Escalate") != std::string::npos);
    CHECK(gen.find("# Patch -> Escalate") != std::string::npos);
}

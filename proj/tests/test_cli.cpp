#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const std::string kCli = STARSENT_CLI_PATH;
const std::string kFixtures = STARSENT_FIXTURE_DIR;

struct RunResult {
    int exit_code = -1;
    std::string output;  // stdout + stderr
};

RunResult run(const std::string& args) {
    const std::string cmd = kCli + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    RunResult r;
    char buf[4096];
    while (size_t n = fread(buf, 1, sizeof(buf), pipe)) r.output.append(buf, n);
    const int status = pclose(pipe);
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("no arguments prints usage and exits 1") {
    const auto r = run("");
    CHECK(r.exit_code == 1);
    CHECK(r.output.find("Usage") != std::string::npos);
}

TEST_CASE("unknown subcommand exits 1 with usage") {
    const auto r = run("frobnicate");
    CHECK(r.exit_code == 1);
}

TEST_CASE("unknown flag exits 1") {
    const auto r = run("clean --in x --out y --definitely-not-a-flag");
    CHECK(r.exit_code == 1);
}

TEST_CASE("clean on the bundled fixture reports removals per reason") {
    const auto dir = fresh_dir("cli_clean");
    const auto r = run("clean --in " + kFixtures + "/corpus/raw_reviews.jsonl --out " +
                       (dir / "clean.jsonl").string() + " --log " +
                       (dir / "removed.jsonl").string());
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("kept 43 of 50") != std::string::npos);
    CHECK(r.output.find("empty=2") != std::string::npos);
    CHECK(r.output.find("emoji_only=2") != std::string::npos);
    CHECK(r.output.find("non_alphabetic=2") != std::string::npos);
    CHECK(r.output.find("too_long=1") != std::string::npos);

    // log lines cover exactly the 7 removals
    std::ifstream log(dir / "removed.jsonl");
    int lines = 0;
    std::string line;
    while (std::getline(log, line)) ++lines;
    CHECK(lines == 7);
}

TEST_CASE("validation failures exit 1, runtime failures exit 2") {
    const auto dir = fresh_dir("cli_errors");
    const auto bad_rating = run("clean --in " + kFixtures + "/corpus/bad_rating.jsonl --out " +
                                (dir / "x.jsonl").string());
    CHECK(bad_rating.exit_code == 1);
    CHECK(bad_rating.output.find("rating") != std::string::npos);

    const auto missing = run("clean --in /nonexistent/nowhere.jsonl --out " +
                             (dir / "y.jsonl").string());
    CHECK(missing.exit_code == 2);
}

TEST_CASE("evaluate writes 5-class and 3-class reports") {
    const auto dir = fresh_dir("cli_eval");
    {
        std::ofstream preds(dir / "preds.jsonl");
        preds << R"({"id":"a","true":5,"pred":5})" << "\n";
        preds << R"({"id":"b","true":1,"pred":2})" << "\n";
        preds << R"({"id":"c","true":3,"pred":null})" << "\n";
        preds << R"({"id":"d","true":4,"pred":4})" << "\n";
    }
    const auto r = run("evaluate --pred " + (dir / "preds.jsonl").string() +
                       " --collapse --out-json " + (dir / "rep.json").string() +
                       " --out-md " + (dir / "rep.md").string());
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("accuracy 0.5") != std::string::npos);

    const std::string rep = slurp(dir / "rep.json");
    CHECK(rep.find("(5-class)") != std::string::npos);
    CHECK(rep.find("(3-class)") != std::string::npos);
    CHECK(slurp(dir / "rep.md").find("pred \\ true") != std::string::npos);
}

TEST_CASE("report renders the bundled counts fixture with its notes") {
    const auto r = run("report --fixture " + kFixtures + "/eval/table3.json");
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("68.74%") != std::string::npos);
    CHECK(r.output.find("67.41") != std::string::npos);  // divergence note
    CHECK(r.output.find("## Notes") != std::string::npos);
}

TEST_CASE("identical seeds give byte-identical stage outputs") {
    const auto d1 = fresh_dir("cli_det1");
    const auto d2 = fresh_dir("cli_det2");
    for (const auto& dir : {d1, d2}) {
        auto c = run("clean --in " + kFixtures + "/corpus/raw_reviews.jsonl --out " +
                     (dir / "clean.jsonl").string());
        REQUIRE(c.exit_code == 0);
        auto s = run("--seed 31 split --in " + (dir / "clean.jsonl").string() +
                     " --fractions 0.6,0.2,0.2 --out-train " + (dir / "train.jsonl").string() +
                     " --out-eval " + (dir / "eval.jsonl").string() + " --out-test " +
                     (dir / "test.jsonl").string());
        REQUIRE(s.exit_code == 0);
    }
    for (const char* name : {"clean.jsonl", "train.jsonl", "eval.jsonl", "test.jsonl"}) {
        CHECK(slurp(d1 / name) == slurp(d2 / name));
    }
    // different seed must actually change the split
    auto s = run("--seed 32 split --in " + (d1 / "clean.jsonl").string() +
                 " --fractions 0.6,0.2,0.2 --out-train " + (d1 / "train2.jsonl").string() +
                 " --out-eval " + (d1 / "eval2.jsonl").string() + " --out-test " +
                 (d1 / "test2.jsonl").string());
    REQUIRE(s.exit_code == 0);
    CHECK(slurp(d1 / "train.jsonl") != slurp(d1 / "train2.jsonl"));
}

TEST_CASE("langid subcommand trains profiles and filters") {
    const auto dir = fresh_dir("cli_langid");
    auto c = run("clean --in " + kFixtures + "/corpus/raw_reviews.jsonl --out " +
                 (dir / "clean.jsonl").string());
    REQUIRE(c.exit_code == 0);
    const auto r = run("langid --in " + (dir / "clean.jsonl").string() +
                       " --keep lt --train lt=" + kFixtures + "/langid/lt.txt --train en=" +
                       kFixtures + "/langid/en.txt --train ru=" + kFixtures +
                       "/langid/ru.txt --out " + (dir / "kept.jsonl").string() +
                       " --separated " + (dir / "sep.jsonl").string() + " --save-profile " +
                       dir.string());
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("kept") != std::string::npos);
    CHECK(fs::exists(dir / "lt.profile.json"));
    CHECK(fs::exists(dir / "kept.jsonl"));
    CHECK(fs::exists(dir / "sep.jsonl"));

    // reload saved profiles instead of retraining
    const auto r2 = run("langid --in " + (dir / "clean.jsonl").string() +
                        " --keep lt --profile " + (dir / "lt.profile.json").string() +
                        " --profile " + (dir / "en.profile.json").string() + " --out " +
                        (dir / "kept2.jsonl").string());
    CHECK(r2.exit_code == 0);
}

TEST_CASE("tokenize trains and applies a wordpiece vocabulary") {
    const auto dir = fresh_dir("cli_tok");
    auto c = run("clean --in " + kFixtures + "/corpus/raw_reviews.jsonl --out " +
                 (dir / "clean.jsonl").string());
    REQUIRE(c.exit_code == 0);
    const auto r = run("tokenize --in " + (dir / "clean.jsonl").string() +
                       " --scheme wordpiece --train-vocab 120 --save-vocab " +
                       (dir / "wp.vocab").string() + " --out " + (dir / "toks.jsonl").string());
    CHECK(r.exit_code == 0);
    CHECK(fs::exists(dir / "wp.vocab"));
    // specials occupy the first four lines
    std::ifstream vocab(dir / "wp.vocab");
    std::string line;
    std::getline(vocab, line);
    CHECK(line == "[PAD]");
    std::getline(vocab, line);
    CHECK(line == "[UNK]");
}

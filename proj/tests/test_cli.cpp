// Integration tests driving the qclus binary as a subprocess. The binary path
// comes in through QCLUS_CLI_PATH at compile time.

#include <catch2/catch_amalgamated.hpp>

#include <qclus/io.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct CliDir {
    fs::path path;
    CliDir() {
        std::random_device rd;
        path = fs::temp_directory_path() / ("qclus_cli_" + std::to_string(rd()));
        fs::create_directories(path);
    }
    ~CliDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Runs the CLI with the given argument string, capturing stdout+stderr.
int run_cli(const CliDir& dir, const std::string& args, std::string* output = nullptr) {
    const std::string capture = dir.file("last_output.txt");
    const std::string cmd =
        std::string(QCLUS_CLI_PATH) + " " + args + " >" + capture + " 2>&1";
    const int status = std::system(cmd.c_str());
    if (output) {
        *output = slurp(capture);
    }
    if (WIFEXITED(status)) {
        return WEXITSTATUS(status);
    }
    return -1;
}

bool same_bytes(const std::string& a, const std::string& b) {
    return slurp(a) == slurp(b);
}

} // namespace

TEST_CASE("cli pipeline runs end to end", "[cli]") {
    CliDir dir;
    const std::string f = dir.file("f.qcfv");
    const std::string l = dir.file("l.qclb");
    const std::string c = dir.file("c.qccd");
    const std::string ck = dir.file("ck.qckp");
    std::string out;

    REQUIRE(run_cli(dir,
                    "synth --classes 3 --per-class 8 --dim 8 --sigma 0.08 --min-sep 1.0 "
                    "--seed 5 --out-features " + f + " --out-labels " + l,
                    &out) == 0);
    REQUIRE(out.find("samples=24") != std::string::npos);

    REQUIRE(run_cli(dir, "build --features " + f + " --labels " + l + " --k 4 --out " + c,
                    &out) == 0);
    REQUIRE(out.find("masks=1") != std::string::npos);

    REQUIRE(run_cli(dir,
                    "train --features " + f + " --clusters " + c + " --out " + ck +
                        " --n-qubits 3 --depth 1 --epochs 2 --seed 3 --log " +
                        dir.file("train.log"),
                    &out) == 0);
    REQUIRE(out.find("epoch=0 batch=0 loss=") != std::string::npos);
    REQUIRE(out.find("trained_epochs=2") != std::string::npos);
    const std::string log = slurp(dir.file("train.log"));
    REQUIRE(log.rfind("epoch=0 batch=0 loss=", 0) == 0);
    REQUIRE(log.find("mean_loss=") != std::string::npos);

    REQUIRE(run_cli(dir,
                    "eval --features " + f + " --labels " + l + " --clusters " + c +
                        " --checkpoint " + ck + " --out " + dir.file("report.txt"),
                    &out) == 0);
    REQUIRE(out.find("pairwise_f=") != std::string::npos);
    REQUIRE(out.find("bcubed_f=") != std::string::npos);
    REQUIRE(slurp(dir.file("report.txt")).find("pairwise_f=") != std::string::npos);
    REQUIRE(fs::exists(dir.file("report.txt") + ".manifest"));

    REQUIRE(run_cli(dir,
                    "cluster --features " + f + " --clusters " + c + " --checkpoint " +
                        ck + " --out " + dir.file("pred.qclb"),
                    &out) == 0);
    REQUIRE(qclus::read_labels(dir.file("pred.qclb")).size() == 24);

    REQUIRE(run_cli(dir,
                    "baseline --features " + f + " --labels " + l + " --clusters " + c,
                    &out) == 0);
    REQUIRE(out.find("kmeans_pairwise_f=") != std::string::npos);
    REQUIRE(out.find("knn_bcubed_f=") != std::string::npos);

    SECTION("resume extends a finished run") {
        REQUIRE(run_cli(dir,
                        "train --features " + f + " --clusters " + c + " --out " +
                            dir.file("ck4.qckp") + " --resume " + ck + " --epochs 4",
                        &out) == 0);
        REQUIRE(out.find("trained_epochs=4") != std::string::npos);
    }

    SECTION("checkpoint width mismatch fails the contract") {
        const std::string f4 = dir.file("f4.qcfv");
        const std::string l4 = dir.file("l4.qclb");
        const std::string c4 = dir.file("c4.qccd");
        REQUIRE(run_cli(dir,
                        "synth --classes 2 --per-class 4 --dim 4 --seed 1 "
                        "--out-features " + f4 + " --out-labels " + l4) == 0);
        REQUIRE(run_cli(dir, "build --features " + f4 + " --k 3 --out " + c4) == 0);
        REQUIRE(run_cli(dir,
                        "eval --features " + f4 + " --labels " + l4 + " --clusters " +
                            c4 + " --checkpoint " + ck,
                        &out) == 1);
        REQUIRE(out.find("error kind=contract") != std::string::npos);
    }

    SECTION("manifest reruns reproduce artifacts bit-exactly") {
        fs::copy_file(c, dir.file("c.orig"));
        REQUIRE(run_cli(dir, "--config " + c + ".manifest") == 0);
        REQUIRE(same_bytes(c, dir.file("c.orig")));

        fs::copy_file(f, dir.file("f.orig"));
        fs::copy_file(l, dir.file("l.orig"));
        REQUIRE(run_cli(dir, "--config " + f + ".manifest") == 0);
        REQUIRE(same_bytes(f, dir.file("f.orig")));
        REQUIRE(same_bytes(l, dir.file("l.orig")));

        fs::copy_file(ck, dir.file("ck.orig"));
        REQUIRE(run_cli(dir, "--config " + ck + ".manifest") == 0);
        REQUIRE(same_bytes(ck, dir.file("ck.orig")));
    }

    SECTION("command-line flags override manifest values") {
        REQUIRE(run_cli(dir, "--config " + c + ".manifest build --k 6 --out " +
                                 dir.file("c6.qccd")) == 0);
        const auto six = qclus::read_clusters(dir.file("c6.qccd"));
        REQUIRE(six.front().members.size() == 6);
    }
}

TEST_CASE("cli usage errors exit 2", "[cli]") {
    CliDir dir;
    std::string out;

    REQUIRE(run_cli(dir, "build --features nope.qcfv --out x.qccd", &out) == 2);
    REQUIRE(out.find("error kind=usage") != std::string::npos);
    REQUIRE(out.find("--k") != std::string::npos);

    REQUIRE(run_cli(dir, "frobnicate", &out) == 2);
    REQUIRE(out.find("error kind=usage") != std::string::npos);

    REQUIRE(run_cli(dir, "train --features f --clusters c --out o --sharing-mode 2QKV",
                    &out) == 2);

    REQUIRE(run_cli(dir, "--help", &out) == 0);
    REQUIRE(run_cli(dir, "build --help", &out) == 0);
    REQUIRE(out.find("--k") != std::string::npos);
}

TEST_CASE("cli rejects unreadable inputs", "[cli]") {
    CliDir dir;
    std::string out;

    REQUIRE(run_cli(dir,
                    "synth --classes 2 --per-class 4 --dim 4 --seed 1 --out-features " +
                        dir.file("f.qcfv") + " --out-labels " + dir.file("l.qclb")) == 0);
    const std::string whole = slurp(dir.file("f.qcfv"));
    std::ofstream(dir.file("trunc.qcfv"), std::ios::binary) << whole.substr(0, 10);

    REQUIRE(run_cli(dir, "build --features " + dir.file("trunc.qcfv") + " --k 2 --out " +
                             dir.file("t.qccd"),
                    &out) == 1);
    REQUIRE(out.find("error kind=format") != std::string::npos);
    REQUIRE_FALSE(fs::exists(dir.file("t.qccd")));

    REQUIRE(run_cli(dir, "build --features " + dir.file("missing.qcfv") + " --k 2 --out " +
                             dir.file("t.qccd"),
                    &out) == 1);
    REQUIRE(out.find("error kind=format") != std::string::npos);
}

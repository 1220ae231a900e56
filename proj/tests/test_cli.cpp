#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

#include "dab/apps.hpp"

namespace {

std::string tmpdir() {
    static std::string d = [] {
        std::string path = "/tmp/dab_cli_test";
        int rc = std::system(("mkdir -p " + path).c_str());
        (void)rc;
        return path;
    }();
    return d;
}

int run_cli(const std::string& args, std::string* out = nullptr) {
    std::string out_path = tmpdir() + "/out.txt";
    std::string cmd = std::string(DAB_CLI_PATH) + " " + args + " > " + out_path + " 2>&1";
    int rc = std::system(cmd.c_str());
    if (out) {
        std::ifstream in(out_path);
        std::stringstream ss;
        ss << in.rdbuf();
        *out = ss.str();
    }
    return WEXITSTATUS(rc);
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

}  // namespace

TEST_CASE("fid run: empty ops file gives a build-only report") {
    std::string ops = tmpdir() + "/empty.ops";
    write_file(ops, "");
    std::string bits = tmpdir() + "/bits.bin";
    write_file(bits, std::string(32, '\0'));
    std::string out;
    int rc = run_cli("fid run --input " + bits + " --ops " + ops + " --n 256 --r 16 --w 16", &out);
    CHECK(rc == 0);
    auto j = nlohmann::json::parse(out);
    CHECK(j["answers"].size() == 0);
    CHECK(j["space_report"]["total_bits"].get<uint64_t>() > 0);
    CHECK(j["space_report"].contains("overhead_breakdown"));
    CHECK(j["instrumentation"]["updates"] == 0);
}

TEST_CASE("fid run with --verify on a mixed stream") {
    std::string ops = tmpdir() + "/mix.ops";
    std::ostringstream os;
    std::mt19937_64 rng(4);
    uint64_t n = 512;
    std::vector<int> mirror(n, 0);
    uint64_t ones = 0;
    for (int i = 0; i < 400; ++i) {
        int kind = rng() % 3;
        if (kind == 0) {
            uint64_t k = 1 + rng() % n;
            int b = rng() % 2;
            os << "U " << k << " " << b << "\n";
            ones += b - mirror[k - 1];
            mirror[k - 1] = b;
        } else if (kind == 1) {
            os << "R " << rng() % (n + 1) << "\n";
        } else if (ones > 0) {
            os << "S " << 1 + rng() % ones << "\n";
        }
    }
    write_file(ops, os.str());
    std::string bits = tmpdir() + "/bits512.bin";
    write_file(bits, std::string(64, '\0'));
    std::string out;
    int rc = run_cli(
        "fid run --input " + bits + " --ops " + ops + " --n 512 --r 32 --w 16 --verify", &out);
    INFO(out);
    CHECK(rc == 0);
}

TEST_CASE("malformed ops line reports its line number") {
    std::string ops = tmpdir() + "/bad.ops";
    write_file(ops, "Q 1\n");
    std::string bits = tmpdir() + "/bits2.bin";
    write_file(bits, std::string(8, '\0'));
    std::string out;
    int rc = run_cli("fid run --input " + bits + " --ops " + ops + " --n 64 --r 16 --w 16", &out);
    CHECK(rc == 2);
    CHECK(out.find("line 1") != std::string::npos);
}

TEST_CASE("ac run round-trips a snapshot") {
    std::string ops = tmpdir() + "/ac.ops";
    write_file(ops, "T 1 2\nG 1\nG 2\n");
    std::string syms = tmpdir() + "/syms.bin";
    std::string data(64, '\0');
    data[1] = 1;
    write_file(syms, data);
    std::string snap = tmpdir() + "/ac.snap";
    std::string out;
    int rc = run_cli("ac run --input " + syms + " --ops " + ops +
                         " --n 64 --r 16 --w 16 --sigma 3 --verify --snapshot " + snap,
                     &out);
    INFO(out);
    CHECK(rc == 0);
    auto j = nlohmann::json::parse(out);
    REQUIRE(j["answers"].size() == 2);
    CHECK(j["answers"][0] == 2);
    CHECK(j["answers"][1] == 1);
    std::ifstream in(snap, std::ios::binary);
    REQUIRE(in.good());
    auto ac = dab::ac_state::load(in);
    CHECK(ac.get(1) == 2);
    CHECK(ac.get(2) == 1);
}

TEST_CASE("bench harddist runs and reports the bound") {
    std::string out;
    int rc = run_cli("bench harddist --n 256 --seed 7", &out);
    CHECK(rc == 0);
    auto j = nlohmann::json::parse(out);
    CHECK(j["n"] == 256);
    CHECK(j["per_op_bound_ok"] == true);
    CHECK(j["amortized_relocations"].get<double>() > 0);
    // invalid n
    rc = run_cli("bench harddist --n 1001 --seed 7", &out);
    CHECK(rc == 2);
}

TEST_CASE("bench adapter emits a CSV with bounded columns") {
    std::string csv = tmpdir() + "/sweep.csv";
    std::string out;
    int rc = run_cli("bench adapter --lmax 64 --out " + csv, &out);
    CHECK(rc == 0);
    std::ifstream in(csv);
    std::string header;
    std::getline(in, header);
    CHECK(header == "L,max_relocations,max_rounds");
    uint64_t l, moves, rounds;
    char c1, c2;
    int rows = 0;
    while (in >> l >> c1 >> moves >> c2 >> rounds) {
        CHECK(moves <= dab::reloc_bound(l));
        CHECK(rounds <= dab::rounds_bound(l));
        ++rows;
    }
    CHECK(rows == 64);
}

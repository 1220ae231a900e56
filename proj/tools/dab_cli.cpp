// Batch harness: run operation streams against the FID/AC structures, sweep
// adapter costs, and replay the hard-distribution workload.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "dab/adapter.hpp"
#include "dab/apps.hpp"
#include "dab/harddist.hpp"
#include "dab/oracle.hpp"
#include "dab/verify.hpp"

namespace {

using nlohmann::json;

struct op {
    char kind;  // R, S, U, G, T
    uint64_t a = 0;
    uint64_t b = 0;
};

std::vector<op> parse_ops(const std::string& path, uint64_t n, bool is_fid) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open ops file: " + path);
    std::vector<op> ops;
    std::string line;
    uint64_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string kind;
        if (!(ls >> kind)) continue;  // blank line
        auto fail = [&](const std::string& why) {
            throw std::runtime_error("ops file line " + std::to_string(lineno) + ": " + why);
        };
        op o{};
        if (kind.size() != 1) fail("unknown op '" + kind + "'");
        o.kind = kind[0];
        auto need_index = [&](uint64_t lo) {
            if (!(ls >> o.a)) fail("missing index");
            if (o.a < lo || o.a > n) fail("index out of declared range");
        };
        switch (o.kind) {
            case 'R':
                if (!is_fid) fail("R is a rank op; valid for fid only");
                need_index(0);
                break;
            case 'S':
                if (!is_fid) fail("S is a select op; valid for fid only");
                need_index(1);
                break;
            case 'U':
                if (!is_fid) fail("U updates a bit; valid for fid only");
                need_index(1);
                if (!(ls >> o.b) || o.b > 1) fail("bit must be 0 or 1");
                break;
            case 'G':
                if (is_fid) fail("G reads a symbol; valid for ac only");
                need_index(1);
                break;
            case 'T':
                if (is_fid) fail("T writes a symbol; valid for ac only");
                need_index(1);
                if (!(ls >> o.b)) fail("missing symbol");
                break;
            default:
                fail("unknown op '" + kind + "'");
        }
        std::string extra;
        if (ls >> extra) fail("trailing junk '" + extra + "'");
        ops.push_back(o);
    }
    return ops;
}

std::vector<uint8_t> read_bit_file(const std::string& path, uint64_t n) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open input file: " + path);
    std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (raw.size() * 8 < n) throw std::runtime_error("input file shorter than n bits");
    std::vector<uint8_t> bits(n);
    for (uint64_t i = 0; i < n; ++i) bits[i] = (raw[i / 8] >> (i % 8)) & 1;
    return bits;
}

std::vector<dab::symbol_t> read_symbol_file(const std::string& path, uint64_t n) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open input file: " + path);
    std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (raw.size() < n) throw std::runtime_error("input file shorter than n symbols");
    std::vector<dab::symbol_t> a(n);
    for (uint64_t i = 0; i < n; ++i) a[i] = static_cast<uint8_t>(raw[i]);
    return a;
}

json space_json(const dab::space_report& rep) { return json::parse(rep.to_json()); }

json instrumentation_json(const std::vector<dab::update_stats>& all) {
    uint64_t alloc = 0, rel = 0, moves = 0, writes = 0, suffix = 0, worst = 0;
    for (const auto& s : all) {
        alloc += s.allocations;
        rel += s.releases;
        moves += s.relocated_words;
        writes += s.word_writes;
        suffix += s.suffix_words;
        worst = std::max(worst, s.relocated_words);
    }
    return json{{"updates", all.size()},        {"allocations", alloc},
                {"releases", rel},              {"relocated_words", moves},
                {"word_writes", writes},        {"suffix_words", suffix},
                {"max_relocations_per_update", worst}};
}

int run_fid(const std::string& input, const std::string& opsfile, uint64_t n, uint64_t r,
            uint32_t w, bool verify_answers, const std::string& snapshot) {
    auto bits = input.empty() ? std::vector<uint8_t>(n, 0) : read_bit_file(input, n);
    auto ops = parse_ops(opsfile, n, true);
    auto f = dab::fid_state::from_bits(bits, r, w);
    dab::oracle::naive_bitset mirror(n);
    for (uint64_t i = 0; i < n; ++i) mirror.bits[i] = bits[i];

    json answers = json::array();
    std::vector<dab::update_stats> stats;
    for (size_t idx = 0; idx < ops.size(); ++idx) {
        const op& o = ops[idx];
        if (o.kind == 'R') {
            uint64_t got = f.rank(o.a);
            answers.push_back(got);
            if (verify_answers && got != mirror.rank(o.a)) {
                std::cerr << "verification mismatch at op " << idx + 1 << "\n";
                return 2;
            }
        } else if (o.kind == 'S') {
            if (o.a > f.ones()) {
                std::cerr << "select out of range at op " << idx + 1 << "\n";
                return 2;
            }
            uint64_t got = f.select(o.a);
            answers.push_back(got);
            if (verify_answers && got != mirror.select(o.a)) {
                std::cerr << "verification mismatch at op " << idx + 1 << "\n";
                return 2;
            }
        } else {
            stats.push_back(f.update(o.a, o.b != 0));
            mirror.bits[o.a - 1] = o.b ? 1 : 0;
        }
    }
    if (!snapshot.empty()) {
        std::ofstream out(snapshot, std::ios::binary);
        f.save(out);
    }
    json report{{"schema_version", 1},
                {"answers", answers},
                {"space_report", space_json(f.report())},
                {"instrumentation", instrumentation_json(stats)}};
    std::cout << report.dump(2) << "\n";
    return 0;
}

int run_ac(const std::string& input, const std::string& opsfile, uint64_t n, uint64_t r,
           uint32_t w, uint32_t sigma, bool verify_answers, const std::string& snapshot) {
    auto a = input.empty() ? std::vector<dab::symbol_t>(n, 0) : read_symbol_file(input, n);
    if (sigma == 0) {  // infer from the input
        uint32_t mx = 1;
        for (auto s : a) mx = std::max<uint32_t>(mx, s + 1);
        sigma = std::max<uint32_t>(mx, 2);
    }
    auto ops = parse_ops(opsfile, n, false);
    auto ac = dab::ac_state::from_symbols(a, r, sigma, w);

    json answers = json::array();
    std::vector<dab::update_stats> stats;
    for (size_t idx = 0; idx < ops.size(); ++idx) {
        const op& o = ops[idx];
        if (o.kind == 'G') {
            uint64_t got = ac.get(o.a);
            answers.push_back(got);
            if (verify_answers && got != a[o.a - 1]) {
                std::cerr << "verification mismatch at op " << idx + 1 << "\n";
                return 2;
            }
        } else {
            if (o.b >= sigma) {
                std::cerr << "symbol out of range at op " << idx + 1 << "\n";
                return 2;
            }
            stats.push_back(ac.set(o.a, static_cast<dab::symbol_t>(o.b)));
            a[o.a - 1] = static_cast<dab::symbol_t>(o.b);
        }
    }
    if (!snapshot.empty()) {
        std::ofstream out(snapshot, std::ios::binary);
        ac.save(out);
    }
    json report{{"schema_version", 1},
                {"answers", answers},
                {"space_report", space_json(ac.report())},
                {"instrumentation", instrumentation_json(stats)}};
    std::cout << report.dump(2) << "\n";
    return 0;
}

int bench_adapter(uint64_t lmax, const std::string& out_path) {
    if (lmax > 4096) {
        std::cerr << "bench adapter: lmax capped at 4096\n";
        return 2;
    }
    auto sw = dab::verify::adapter_sweep(lmax);
    std::ofstream out(out_path);
    if (!out) {
        std::cerr << "cannot open " << out_path << "\n";
        return 2;
    }
    out << "L,max_relocations,max_rounds\n";
    for (uint64_t l = 1; l <= lmax; ++l)
        out << l << "," << sw.max_moves_by_l[l] << "," << sw.max_rounds_by_l[l] << "\n";
    std::cerr << "sweep ok: bijective=" << sw.bijective_ok << " stable=" << sw.stable_ok
              << " rounds_bound=" << sw.rounds_ok << " reloc_bound=" << sw.reloc_ok
              << " max_ratio=" << sw.max_reloc_ratio << "\n";
    return sw.bijective_ok && sw.stable_ok && sw.rounds_ok && sw.reloc_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"compressed dynamic aB-trees: batch harness"};
    app.require_subcommand(1);

    // fid|ac run
    std::string input, opsfile, snapshot;
    uint64_t n = 0, r = 64;
    uint32_t w = 16, sigma = 0;
    bool verify_answers = false;

    auto add_run = [&](CLI::App* sub, bool is_fid) {
        auto* run = sub->add_subcommand("run", "execute an operation stream");
        run->add_option("--input", input, "raw input file (bits or byte-per-symbol)");
        run->add_option("--ops", opsfile, "operation stream file")->required();
        run->add_option("--n", n, "array length")->required();
        run->add_option("--r", r, "block size (power of two)");
        run->add_option("--w", w, "word size in bits");
        if (!is_fid) run->add_option("--sigma", sigma, "alphabet size (default: inferred)");
        run->add_flag("--verify", verify_answers, "cross-check answers against the oracle");
        run->add_option("--snapshot", snapshot, "write a snapshot after the run");
        return run;
    };
    auto* fid = app.add_subcommand("fid", "dynamic rank/select dictionary");
    auto* fid_run = add_run(fid, true);
    auto* ac = app.add_subcommand("ac", "dynamic arithmetic coding");
    auto* ac_run = add_run(ac, false);

    // bench
    auto* bench = app.add_subcommand("bench", "adapter benchmarks");
    uint64_t lmax = 1024, hd_n = 1 << 12, hd_lambda = 0, hd_seed = 1;
    std::string csv_out = "adapter_sweep.csv";
    auto* bad = bench->add_subcommand("adapter", "exhaustive relocation/rounds sweep");
    bad->add_option("--lmax", lmax, "sweep all keys with L <= lmax (max 4096)");
    bad->add_option("--out", csv_out, "CSV output path");
    auto* bhd = bench->add_subcommand("harddist", "hard-distribution workload");
    bhd->add_option("--n", hd_n, "insertions per side")->required();
    bhd->add_option("--lambda", hd_lambda, "branching factor (default (log2 n)^2)");
    bhd->add_option("--seed", hd_seed, "sampler seed");

    // verify all
    auto* verify_cmd = app.add_subcommand("verify", "property suites");
    auto* verify_all = verify_cmd->add_subcommand("all", "run every property suite");

    CLI11_PARSE(app, argc, argv);

    try {
        if (fid_run->parsed()) return run_fid(input, opsfile, n, r, w, verify_answers, snapshot);
        if (ac_run->parsed())
            return run_ac(input, opsfile, n, r, w, sigma, verify_answers, snapshot);
        if (bad->parsed()) return bench_adapter(lmax, csv_out);
        if (bhd->parsed()) {
            auto rep = dab::run_hard_distribution({hd_n, hd_lambda, hd_seed});
            std::cout << rep.to_json() << "\n";
            return rep.per_op_bound_ok ? 0 : 1;
        }
        if (verify_all->parsed()) {
            auto results = dab::verify::run_all();
            bool all = true;
            for (const auto& res : results) {
                std::printf("%s  %s  [%.1fs]  %s\n", res.pass ? "PASS" : "FAIL", res.name.c_str(),
                            res.seconds, res.detail.c_str());
                all = all && res.pass;
            }
            return all ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    std::cerr << app.help();
    return 2;
}

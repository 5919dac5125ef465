// Serial reference vs OpenMP replicate loops: wall time and output equality.
//
//   bench_parallel [B] [reps]
//
// B (default 200) bootstrap replicates of prop-ni at n = 2000, and a
// benchmark grid of n = 1000 over the four designs with `reps` (default 50)
// replicates each.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>

#include "sace/models.hpp"
#include "sace/parallel.hpp"
#include "sace/simulate.hpp"

namespace {

template <class Fn>
double seconds(Fn&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

}  // namespace

int main(int argc, char** argv) {
    using namespace sace;
    const std::size_t B = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 200;
    const std::size_t reps = argc > 2 ? std::strtoul(argv[2], nullptr, 10) : 50;
    std::printf("threads: %d\n", max_threads());

    SimulationSetting s;
    s.n = 2000;
    s.seed = 11;
    const Dataset data = gen_dataset(s).data;

    SaceEstimate ser, par;
    const double t_ser = seconds([&] { ser = bootstrap(data, Method::prop_ni, {}, B, 5, Execution::serial); });
    const double t_par = seconds([&] { par = bootstrap(data, Method::prop_ni, {}, B, 5, Execution::parallel); });
    const bool boot_equal = same_bits(*ser.se, *par.se) && same_bits(*ser.q025, *par.q025) &&
                            same_bits(*ser.q975, *par.q975);
    std::printf("bootstrap B=%zu  serial %.3fs  parallel %.3fs  speedup %.2f  identical=%s\n", B,
                t_ser, t_par, t_ser / t_par, boot_equal ? "yes" : "no");

    std::vector<BenchCellSpec> grid;
    for (int d1 : {0, 1})
        for (int d2 : {0, 1}) grid.push_back({1000, d1, d2, false});
    BenchReport rs, rp;
    const double b_ser = seconds([&] { rs = run_benchmark(grid, preset_methods(), reps, 9, Execution::serial); });
    const double b_par = seconds([&] { rp = run_benchmark(grid, preset_methods(), reps, 9, Execution::parallel); });
    bool bench_equal = rs.entries.size() == rp.entries.size();
    for (std::size_t i = 0; bench_equal && i < rs.entries.size(); ++i)
        bench_equal = rs.entries[i].estimates == rp.entries[i].estimates;
    std::printf("run_benchmark reps=%zu  serial %.3fs  parallel %.3fs  speedup %.2f  identical=%s\n",
                reps, b_ser, b_par, b_ser / b_par, bench_equal ? "yes" : "no");
    return boot_equal && bench_equal ? 0 : 1;
}

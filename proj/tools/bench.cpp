// Benchmark comparing the serial and OpenMP Monte Carlo paths on the
// synthetic layered DAG. The default shape is 500 layers x 1000 steps
// (half a million nodes); --trials 1000 is the stretch run.

#include <chrono>
#include <cinttypes>
#include <cstdio>
#include <cstring>

#include <CLI11.hpp>

#include "threatlang/synthetic.hpp"
#include "threatlang/ttc.hpp"

using namespace threatlang;

namespace {

uint64_t checksum(const SimulationReport& r) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (double v : r.samples) {
        uint64_t bits;
        static_assert(sizeof bits == sizeof v);
        std::memcpy(&bits, &v, sizeof bits);
        for (int i = 0; i < 8; ++i) {
            h ^= (bits >> (8 * i)) & 0xff;
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"threatlang-bench: serial vs OpenMP Monte Carlo"};
    uint32_t layers = 500, width = 1000;
    uint64_t trials = 100, seed = 1;
    int workers = 0; // 0 = OpenMP default
    bool skip_serial = false;
    app.add_option("--layers", layers, "graph layers");
    app.add_option("--width", width, "steps per layer");
    app.add_option("--trials", trials, "Monte Carlo trials");
    app.add_option("--seed", seed, "master seed");
    app.add_option("--workers", workers, "parallel worker threads (0 = library default)");
    app.add_flag("--skip-serial", skip_serial, "only run the parallel path");
    CLI11_PARSE(app, argc, argv);

    auto t0 = std::chrono::steady_clock::now();
    AttackGraph g = make_layered_graph(layers, width);
    std::printf("graph: %zu steps, %zu edges, built in %.2f s\n", g.step_count(), g.edges().size(),
                seconds_since(t0));

    uint64_t serial_sum = 0;
    if (!skip_serial) {
        auto t1 = std::chrono::steady_clock::now();
        SimulationReport serial = monte_carlo(g, trials, seed, {}, 1);
        double dt = seconds_since(t1);
        serial_sum = checksum(serial);
        std::printf("serial:   %" PRIu64 " trials in %8.2f s  (%.3f s/trial)  checksum %016" PRIx64 "\n",
                    trials, dt, dt / static_cast<double>(trials), serial_sum);
    }

    auto t2 = std::chrono::steady_clock::now();
    SimulationReport parallel = monte_carlo(g, trials, seed, {}, workers == 0 ? -1 : workers);
    double dt = seconds_since(t2);
    uint64_t parallel_sum = checksum(parallel);
    std::printf("parallel: %" PRIu64 " trials in %8.2f s  (%.3f s/trial)  checksum %016" PRIx64 "\n",
                trials, dt, dt / static_cast<double>(trials), parallel_sum);

    if (!skip_serial && serial_sum != parallel_sum) {
        std::printf("MISMATCH: serial and parallel reports differ\n");
        return 1;
    }
    return 0;
}

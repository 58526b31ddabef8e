// Writes the bundled replay-trace fixture: one 20 s session starting at
// t = 20 s, 2 mg quiet noise, seed 7, 60 s of calm afterwards.
#include <cstdio>

#include "parkmon/simulator.hpp"

int main(int argc, char** argv) {
    if (argc != 2) {
        std::fprintf(stderr, "usage: make_trace_fixture OUT.csv\n");
        return 2;
    }
    parkmon::SessionPlan plan;
    plan.start_t = 20.0;
    plan.active_spans = {{0.0, 20.0}};
    const auto samples = parkmon::synth_vibration(plan, 2.0, 7);

    std::FILE* f = std::fopen(argv[1], "w");
    if (!f) return 1;
    std::fprintf(f, "t_s,ax_mg,ay_mg,az_mg\n");
    for (const auto& s : samples) std::fprintf(f, "%.1f,%.4f,%.4f,%.4f\n", s.t, s.ax, s.ay, s.az);
    return std::fclose(f) == 0 ? 0 : 1;
}

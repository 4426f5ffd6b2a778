#include "threatlang/synthetic.hpp"

#include <cstdio>

namespace threatlang {

AttackGraph make_layered_graph(uint32_t layers, uint32_t width) {
    AttackGraph g;
    auto node_id = [](uint32_t layer, uint32_t w) {
        char buf[24];
        std::snprintf(buf, sizeof buf, "n%04u_%05u", layer, w);
        return std::string(buf);
    };

    const TtcDistribution fast = TtcDistribution::exponential(2.0);
    const TtcDistribution slow = TtcDistribution::exponential(0.5);
    const TtcDistribution fixed = TtcDistribution::constant(1.0);

    for (uint32_t l = 0; l < layers; ++l) {
        for (uint32_t w = 0; w < width; ++w) {
            StepNode s;
            s.id = node_id(l, w);
            const uint32_t mix = l * width + w;
            s.kind = (mix % 3 == 0 && l > 0) ? StepKind::And : StepKind::Or;
            s.ttc = mix % 5 == 0 ? fixed : (mix % 2 == 0 ? fast : slow);
            s.entry = l == 0;
            g.add_step(std::move(s));
        }
    }
    for (uint32_t l = 1; l < layers; ++l) {
        for (uint32_t w = 0; w < width; ++w) {
            g.add_edge(node_id(l - 1, w), node_id(l, w));
            g.add_edge(node_id(l - 1, (w + 7) % width), node_id(l, w));
        }
    }
    g.finalize();
    return g;
}

} // namespace threatlang

#pragma once

#include <cstddef>
#include <deque>
#include <vector>

namespace dermflow::segmentation {

/**
 * s-t min-cut on a sparse directed graph using the Boykov-Kolmogorov
 * augmenting-path algorithm (two search trees, orphan adoption, tree reuse).
 *
 * Nodes are processed in insertion order when they first become active, so
 * results are deterministic for a fixed construction order.
 */
class MaxFlowGraph {
public:
    using NodeId = int;

    explicit MaxFlowGraph(int node_count, std::size_t edge_hint = 0);

    int node_count() const noexcept { return static_cast<int>(nodes_.size()); }

    /// Adds capacity source->node and node->sink. Only the difference is kept
    /// as a residual; the common part is pre-accounted as flow.
    void add_terminal_weights(NodeId node, double source_cap, double sink_cap);

    /// Adds the pair of arcs a->b with `cap_ab` and b->a with `cap_ba`.
    void add_edge(NodeId a, NodeId b, double cap_ab, double cap_ba);

    /// Runs the max-flow computation. May be called once per graph.
    double solve();

    /// True if the node ends up on the source side of the minimum cut.
    /// Nodes that are in neither search tree belong to the sink side.
    bool in_source_segment(NodeId node) const;

    double flow() const noexcept { return flow_; }

private:
    static constexpr int kNone = -1;
    static constexpr int kTerminal = -2;
    static constexpr int kOrphan = -3;

    struct Arc {
        NodeId head;
        int next;     // next outgoing arc of the same tail
        int sister;   // reverse arc
        double r_cap;
    };

    struct Node {
        int first = kNone;   // first outgoing arc
        int parent = kNone;  // arc to parent, or kTerminal/kOrphan/kNone
        long long ts = 0;
        int dist = 0;
        bool is_sink = false;
        bool active = false;
        double tr_cap = 0.0;  // >0: residual from source, <0: residual to sink
    };

    void set_active(NodeId n);
    NodeId next_active();
    void augment(int middle_arc);
    void process_source_orphan(NodeId n);
    void process_sink_orphan(NodeId n);
    void set_orphan_front(NodeId n);
    void set_orphan_rear(NodeId n);

    std::vector<Node> nodes_;
    std::vector<Arc> arcs_;
    std::deque<NodeId> active_;
    std::deque<NodeId> orphans_;
    long long time_ = 0;
    double flow_ = 0.0;
    bool solved_ = false;
};

}  // namespace dermflow::segmentation

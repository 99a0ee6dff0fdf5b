#include "dermflow/maxflow.hpp"

#include "dermflow/error.hpp"

#include <algorithm>
#include <limits>

namespace dermflow::segmentation {

MaxFlowGraph::MaxFlowGraph(int node_count, std::size_t edge_hint) {
    if (node_count < 0) {
        throw InvalidArgument("negative node count");
    }
    nodes_.resize(static_cast<std::size_t>(node_count));
    arcs_.reserve(2 * edge_hint);
}

void MaxFlowGraph::add_terminal_weights(NodeId node, double source_cap, double sink_cap) {
    Node& n = nodes_.at(static_cast<std::size_t>(node));
    const double delta = n.tr_cap;
    if (delta > 0) {
        source_cap += delta;
    } else {
        sink_cap -= delta;
    }
    flow_ += std::min(source_cap, sink_cap);
    n.tr_cap = source_cap - sink_cap;
}

void MaxFlowGraph::add_edge(NodeId a, NodeId b, double cap_ab, double cap_ba) {
    if (a == b) {
        throw InvalidArgument("self loop in flow graph");
    }
    const int ab = static_cast<int>(arcs_.size());
    const int ba = ab + 1;
    Node& na = nodes_.at(static_cast<std::size_t>(a));
    Node& nb = nodes_.at(static_cast<std::size_t>(b));
    arcs_.push_back({b, na.first, ba, cap_ab});
    arcs_.push_back({a, nb.first, ab, cap_ba});
    na.first = ab;
    nb.first = ba;
}

void MaxFlowGraph::set_active(NodeId n) {
    Node& node = nodes_[static_cast<std::size_t>(n)];
    if (!node.active) {
        node.active = true;
        active_.push_back(n);
    }
}

MaxFlowGraph::NodeId MaxFlowGraph::next_active() {
    while (!active_.empty()) {
        const NodeId n = active_.front();
        active_.pop_front();
        Node& node = nodes_[static_cast<std::size_t>(n)];
        node.active = false;
        if (node.parent != kNone) {
            return n;
        }
    }
    return kNone;
}

void MaxFlowGraph::set_orphan_front(NodeId n) {
    nodes_[static_cast<std::size_t>(n)].parent = kOrphan;
    orphans_.push_front(n);
}

void MaxFlowGraph::set_orphan_rear(NodeId n) {
    nodes_[static_cast<std::size_t>(n)].parent = kOrphan;
    orphans_.push_back(n);
}

void MaxFlowGraph::augment(int middle) {
    Arc& mid = arcs_[static_cast<std::size_t>(middle)];
    double bottleneck = mid.r_cap;

    // Source tree side: walk from the tail of the middle arc up to the source.
    NodeId i = arcs_[static_cast<std::size_t>(mid.sister)].head;
    while (true) {
        const int a = nodes_[static_cast<std::size_t>(i)].parent;
        if (a == kTerminal) {
            break;
        }
        const Arc& arc = arcs_[static_cast<std::size_t>(a)];
        bottleneck = std::min(bottleneck, arcs_[static_cast<std::size_t>(arc.sister)].r_cap);
        i = arc.head;
    }
    bottleneck = std::min(bottleneck, nodes_[static_cast<std::size_t>(i)].tr_cap);

    // Sink tree side.
    i = mid.head;
    while (true) {
        const int a = nodes_[static_cast<std::size_t>(i)].parent;
        if (a == kTerminal) {
            break;
        }
        const Arc& arc = arcs_[static_cast<std::size_t>(a)];
        bottleneck = std::min(bottleneck, arc.r_cap);
        i = arc.head;
    }
    bottleneck = std::min(bottleneck, -nodes_[static_cast<std::size_t>(i)].tr_cap);

    arcs_[static_cast<std::size_t>(mid.sister)].r_cap += bottleneck;
    mid.r_cap -= bottleneck;

    i = arcs_[static_cast<std::size_t>(mid.sister)].head;
    while (true) {
        const int a = nodes_[static_cast<std::size_t>(i)].parent;
        if (a == kTerminal) {
            break;
        }
        Arc& arc = arcs_[static_cast<std::size_t>(a)];
        Arc& sister = arcs_[static_cast<std::size_t>(arc.sister)];
        arc.r_cap += bottleneck;
        sister.r_cap -= bottleneck;
        if (sister.r_cap <= 0) {
            sister.r_cap = 0;
            set_orphan_front(i);
        }
        i = arc.head;
    }
    Node& source_root = nodes_[static_cast<std::size_t>(i)];
    source_root.tr_cap -= bottleneck;
    if (source_root.tr_cap <= 0) {
        source_root.tr_cap = 0;
        set_orphan_front(i);
    }

    i = mid.head;
    while (true) {
        const int a = nodes_[static_cast<std::size_t>(i)].parent;
        if (a == kTerminal) {
            break;
        }
        Arc& arc = arcs_[static_cast<std::size_t>(a)];
        Arc& sister = arcs_[static_cast<std::size_t>(arc.sister)];
        sister.r_cap += bottleneck;
        arc.r_cap -= bottleneck;
        if (arc.r_cap <= 0) {
            arc.r_cap = 0;
            set_orphan_front(i);
        }
        i = arc.head;
    }
    Node& sink_root = nodes_[static_cast<std::size_t>(i)];
    sink_root.tr_cap += bottleneck;
    if (sink_root.tr_cap >= 0) {
        sink_root.tr_cap = 0;
        set_orphan_front(i);
    }

    flow_ += bottleneck;
}

void MaxFlowGraph::process_source_orphan(NodeId i) {
    constexpr int kInfiniteDist = std::numeric_limits<int>::max();
    int best_arc = kNone;
    int best_dist = kInfiniteDist;

    for (int a0 = nodes_[static_cast<std::size_t>(i)].first; a0 != kNone; a0 = arcs_[static_cast<std::size_t>(a0)].next) {
        const Arc& out = arcs_[static_cast<std::size_t>(a0)];
        if (arcs_[static_cast<std::size_t>(out.sister)].r_cap <= 0) {
            continue;
        }
        NodeId j = out.head;
        const Node& nj = nodes_[static_cast<std::size_t>(j)];
        if (nj.is_sink || nj.parent == kNone) {
            continue;
        }
        // Distance from j to the source, or infinite if j hangs off an orphan.
        int d = 0;
        while (true) {
            Node& cur = nodes_[static_cast<std::size_t>(j)];
            if (cur.ts == time_) {
                d += cur.dist;
                break;
            }
            const int a = cur.parent;
            ++d;
            if (a == kTerminal) {
                cur.ts = time_;
                cur.dist = 1;
                break;
            }
            if (a == kOrphan) {
                d = kInfiniteDist;
                break;
            }
            j = arcs_[static_cast<std::size_t>(a)].head;
        }
        if (d < kInfiniteDist) {
            if (d < best_dist) {
                best_arc = a0;
                best_dist = d;
            }
            for (j = out.head; nodes_[static_cast<std::size_t>(j)].ts != time_;
                 j = arcs_[static_cast<std::size_t>(nodes_[static_cast<std::size_t>(j)].parent)].head) {
                nodes_[static_cast<std::size_t>(j)].ts = time_;
                nodes_[static_cast<std::size_t>(j)].dist = d--;
            }
        }
    }

    Node& ni = nodes_[static_cast<std::size_t>(i)];
    ni.parent = best_arc;
    if (best_arc != kNone) {
        ni.ts = time_;
        ni.dist = best_dist + 1;
        return;
    }
    ni.parent = kNone;
    for (int a0 = ni.first; a0 != kNone; a0 = arcs_[static_cast<std::size_t>(a0)].next) {
        const Arc& out = arcs_[static_cast<std::size_t>(a0)];
        const NodeId j = out.head;
        Node& nj = nodes_[static_cast<std::size_t>(j)];
        if (nj.is_sink || nj.parent == kNone) {
            continue;
        }
        if (arcs_[static_cast<std::size_t>(out.sister)].r_cap > 0) {
            set_active(j);
        }
        if (nj.parent != kTerminal && nj.parent != kOrphan && arcs_[static_cast<std::size_t>(nj.parent)].head == i) {
            set_orphan_rear(j);
        }
    }
}

void MaxFlowGraph::process_sink_orphan(NodeId i) {
    constexpr int kInfiniteDist = std::numeric_limits<int>::max();
    int best_arc = kNone;
    int best_dist = kInfiniteDist;

    for (int a0 = nodes_[static_cast<std::size_t>(i)].first; a0 != kNone; a0 = arcs_[static_cast<std::size_t>(a0)].next) {
        const Arc& out = arcs_[static_cast<std::size_t>(a0)];
        if (out.r_cap <= 0) {
            continue;
        }
        NodeId j = out.head;
        const Node& nj = nodes_[static_cast<std::size_t>(j)];
        if (!nj.is_sink || nj.parent == kNone) {
            continue;
        }
        int d = 0;
        while (true) {
            Node& cur = nodes_[static_cast<std::size_t>(j)];
            if (cur.ts == time_) {
                d += cur.dist;
                break;
            }
            const int a = cur.parent;
            ++d;
            if (a == kTerminal) {
                cur.ts = time_;
                cur.dist = 1;
                break;
            }
            if (a == kOrphan) {
                d = kInfiniteDist;
                break;
            }
            j = arcs_[static_cast<std::size_t>(a)].head;
        }
        if (d < kInfiniteDist) {
            if (d < best_dist) {
                best_arc = a0;
                best_dist = d;
            }
            for (j = out.head; nodes_[static_cast<std::size_t>(j)].ts != time_;
                 j = arcs_[static_cast<std::size_t>(nodes_[static_cast<std::size_t>(j)].parent)].head) {
                nodes_[static_cast<std::size_t>(j)].ts = time_;
                nodes_[static_cast<std::size_t>(j)].dist = d--;
            }
        }
    }

    Node& ni = nodes_[static_cast<std::size_t>(i)];
    ni.parent = best_arc;
    if (best_arc != kNone) {
        ni.ts = time_;
        ni.dist = best_dist + 1;
        return;
    }
    ni.parent = kNone;
    for (int a0 = ni.first; a0 != kNone; a0 = arcs_[static_cast<std::size_t>(a0)].next) {
        const Arc& out = arcs_[static_cast<std::size_t>(a0)];
        const NodeId j = out.head;
        Node& nj = nodes_[static_cast<std::size_t>(j)];
        if (!nj.is_sink || nj.parent == kNone) {
            continue;
        }
        if (out.r_cap > 0) {
            set_active(j);
        }
        if (nj.parent != kTerminal && nj.parent != kOrphan && arcs_[static_cast<std::size_t>(nj.parent)].head == i) {
            set_orphan_rear(j);
        }
    }
}

double MaxFlowGraph::solve() {
    if (solved_) {
        throw InvalidArgument("max-flow graph already solved");
    }
    solved_ = true;

    for (std::size_t n = 0; n < nodes_.size(); ++n) {
        Node& node = nodes_[n];
        node.ts = 0;
        if (node.tr_cap > 0) {
            node.is_sink = false;
            node.parent = kTerminal;
            node.dist = 1;
            set_active(static_cast<NodeId>(n));
        } else if (node.tr_cap < 0) {
            node.is_sink = true;
            node.parent = kTerminal;
            node.dist = 1;
            set_active(static_cast<NodeId>(n));
        } else {
            node.parent = kNone;
        }
    }

    NodeId current = kNone;
    while (true) {
        NodeId i = kNone;
        if (current != kNone) {
            Node& cur = nodes_[static_cast<std::size_t>(current)];
            cur.active = false;
            if (cur.parent != kNone) {
                i = current;
            }
        }
        if (i == kNone) {
            i = next_active();
            if (i == kNone) {
                break;
            }
        }

        // Grow the tree of i until it touches the other tree.
        int middle = kNone;
        const Node& ni = nodes_[static_cast<std::size_t>(i)];
        if (!ni.is_sink) {
            for (int a = ni.first; a != kNone; a = arcs_[static_cast<std::size_t>(a)].next) {
                const Arc& arc = arcs_[static_cast<std::size_t>(a)];
                if (arc.r_cap <= 0) {
                    continue;
                }
                Node& nj = nodes_[static_cast<std::size_t>(arc.head)];
                if (nj.parent == kNone) {
                    nj.is_sink = false;
                    nj.parent = arc.sister;
                    nj.ts = ni.ts;
                    nj.dist = ni.dist + 1;
                    set_active(arc.head);
                } else if (nj.is_sink) {
                    middle = a;
                    break;
                } else if (nj.ts <= ni.ts && nj.dist > ni.dist) {
                    nj.parent = arc.sister;
                    nj.ts = ni.ts;
                    nj.dist = ni.dist + 1;
                }
            }
        } else {
            for (int a = ni.first; a != kNone; a = arcs_[static_cast<std::size_t>(a)].next) {
                const Arc& arc = arcs_[static_cast<std::size_t>(a)];
                if (arcs_[static_cast<std::size_t>(arc.sister)].r_cap <= 0) {
                    continue;
                }
                Node& nj = nodes_[static_cast<std::size_t>(arc.head)];
                if (nj.parent == kNone) {
                    nj.is_sink = true;
                    nj.parent = arc.sister;
                    nj.ts = ni.ts;
                    nj.dist = ni.dist + 1;
                    set_active(arc.head);
                } else if (!nj.is_sink) {
                    middle = arc.sister;
                    break;
                } else if (nj.ts <= ni.ts && nj.dist > ni.dist) {
                    nj.parent = arc.sister;
                    nj.ts = ni.ts;
                    nj.dist = ni.dist + 1;
                }
            }
        }

        ++time_;

        if (middle == kNone) {
            current = kNone;
            continue;
        }

        // Keep i as the current node; flag it active so it is not queued twice.
        nodes_[static_cast<std::size_t>(i)].active = true;
        current = i;

        augment(middle);

        while (!orphans_.empty()) {
            const NodeId orphan = orphans_.front();
            orphans_.pop_front();
            if (nodes_[static_cast<std::size_t>(orphan)].is_sink) {
                process_sink_orphan(orphan);
            } else {
                process_source_orphan(orphan);
            }
        }
    }
    return flow_;
}

bool MaxFlowGraph::in_source_segment(NodeId node) const {
    const Node& n = nodes_.at(static_cast<std::size_t>(node));
    return n.parent != kNone && !n.is_sink;
}

}  // namespace dermflow::segmentation

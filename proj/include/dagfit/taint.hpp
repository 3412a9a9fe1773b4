#pragma once

#include <vector>

#include "dagfit/errors.hpp"

namespace dagfit {

/// Per-node dirty marker. Taint is propagated eagerly (at set time) along the
/// downstream subscription list and cleared lazily when the owning node is
/// evaluated. A frozen flag acts as a propagation barrier: it is neither
/// marked itself nor does it forward the taint.
///
/// Single-writer: flags are not touched concurrently with evaluation.
class TaintFlag {
public:
    bool tainted() const { return tainted_; }
    bool frozen() const { return frozen_; }

    /// Mark this flag and its transitive downstream dirty, stopping at frozen flags.
    void taint() {
        if (frozen_) return;
        tainted_ = true;
        for (TaintFlag* d : downstream_) d->propagate();
    }

    void clear() { tainted_ = false; }

    void freeze() {
        if (tainted_) throw FrozenWhileTainted("cannot freeze a tainted flag");
        frozen_ = true;
    }

    /// Removes the barrier and conservatively re-taints self plus downstream.
    void unfreeze() {
        frozen_ = false;
        taint();
    }

    void subscribe(TaintFlag* downstream) {
        for (TaintFlag* d : downstream_)
            if (d == downstream) return;
        downstream_.push_back(downstream);
    }

    const std::vector<TaintFlag*>& downstream() const { return downstream_; }

private:
    void propagate() {
        if (frozen_ || tainted_) return; // already-dirty subtrees are dirty transitively
        tainted_ = true;
        for (TaintFlag* d : downstream_) d->propagate();
    }

    bool tainted_ = true; // fresh flags are dirty so the first touch evaluates
    bool frozen_ = false;
    std::vector<TaintFlag*> downstream_;
};

} // namespace dagfit

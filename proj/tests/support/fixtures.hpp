#pragma once

#include "cloak/fem.hpp"

namespace cloak::testing {

/// Coarse layout with wide regions so that every region has elements at h ~ 0.2.
inline LayoutSpec tiny_layout(double h = 0.2) {
    LayoutSpec s;
    s.h = h;
    s.obstacle = Circle{{0.0, 0.0}, 0.2};
    s.cloak = Annulus{{0.0, 0.0}, 0.22, 0.5};
    s.observation = Annulus{{0.0, 0.0}, 0.5, 0.9};
    s.source = Circle{{0.6, 0.6}, 0.25};
    return s;
}

}  // namespace cloak::testing

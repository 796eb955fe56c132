#pragma once

// Concrete system kinds, shared between the translation units that build them.

#include <memory>

#include "fk/systems.hpp"

namespace fk::detail {

std::shared_ptr<const MapSystem> make_rotation(double alpha);
std::shared_ptr<const MapSystem> make_torus(double alpha1, double alpha2);
std::shared_ptr<const MapSystem> make_full_shift(int arity, int window);
std::shared_ptr<const MapSystem> make_sturmian(double slope, int window);

std::shared_ptr<const FiberFlow> make_special_flow(std::shared_ptr<const MapSystem> base, Profile roof,
                                                   bool suspension);
std::shared_ptr<const FiberFlow> make_time_change(std::shared_ptr<const FiberFlow> flow, Profile rate);

}  // namespace fk::detail

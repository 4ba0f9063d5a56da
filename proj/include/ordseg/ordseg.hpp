#ifndef ORDSEG_ORDSEG_HPP
#define ORDSEG_ORDSEG_HPP

#include "ordseg/bench.hpp"
#include "ordseg/cem.hpp"
#include "ordseg/em.hpp"
#include "ordseg/fisher.hpp"
#include "ordseg/io.hpp"
#include "ordseg/logistic.hpp"
#include "ordseg/model.hpp"
#include "ordseg/rng.hpp"
#include "ordseg/series.hpp"
#include "ordseg/simulator.hpp"

#endif  // ORDSEG_ORDSEG_HPP

#ifndef DISPLACER_DISPLACER_HPP
#define DISPLACER_DISPLACER_HPP

#include "displacer/error.hpp"
#include "displacer/sexpr.hpp"
#include "displacer/kb.hpp"
#include "displacer/hnsw.hpp"
#include "displacer/vecspace.hpp"
#include "displacer/lexicon.hpp"
#include "displacer/kmeans.hpp"
#include "displacer/displace.hpp"
#include "displacer/analogy.hpp"

#endif  // DISPLACER_DISPLACER_HPP

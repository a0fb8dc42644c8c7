#pragma once

#include "catshaper/beam_splitter.hpp"
#include "catshaper/conditioning.hpp"
#include "catshaper/detector.hpp"
#include "catshaper/errors.hpp"
#include "catshaper/fock.hpp"
#include "catshaper/optimizer.hpp"
#include "catshaper/selfcheck.hpp"
#include "catshaper/version.hpp"

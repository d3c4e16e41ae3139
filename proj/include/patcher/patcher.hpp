#pragma once

#include "patcher/attention.hpp"
#include "patcher/backends.hpp"
#include "patcher/dataset.hpp"
#include "patcher/detection.hpp"
#include "patcher/domain.hpp"
#include "patcher/edit.hpp"
#include "patcher/enhancement.hpp"
#include "patcher/error.hpp"
#include "patcher/extraction.hpp"
#include "patcher/orchestrator.hpp"
#include "patcher/sim.hpp"
#include "patcher/text.hpp"
#include "patcher/wordnet.hpp"

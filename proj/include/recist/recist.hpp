#pragma once
// Umbrella header for the ReCiSt self-healing simulator library.

#include "recist/config.hpp"
#include "recist/containment.hpp"
#include "recist/continuum.hpp"
#include "recist/diagnosis.hpp"
#include "recist/faults.hpp"
#include "recist/io.hpp"
#include "recist/knowledge.hpp"
#include "recist/logs.hpp"
#include "recist/metacognition.hpp"
#include "recist/model.hpp"
#include "recist/pipeline.hpp"
#include "recist/reasoner.hpp"
#include "recist/telemetry.hpp"

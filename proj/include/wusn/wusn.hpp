#pragma once

#include "wusn/config.hpp"
#include "wusn/data_pipeline.hpp"
#include "wusn/error.hpp"
#include "wusn/hmm.hpp"
#include "wusn/mdp.hpp"
#include "wusn/pipeline.hpp"
#include "wusn/simulator.hpp"
#include "wusn/soil_channel.hpp"

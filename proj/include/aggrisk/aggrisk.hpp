#pragma once

#include <aggrisk/bench.hpp>
#include <aggrisk/core_model.hpp>
#include <aggrisk/datagen.hpp>
#include <aggrisk/engine_mapreduce.hpp>
#include <aggrisk/engine_seq.hpp>
#include <aggrisk/error.hpp>
#include <aggrisk/financial_terms.hpp>
#include <aggrisk/input_split.hpp>
#include <aggrisk/mapreduce_runtime.hpp>
#include <aggrisk/metrics.hpp>
#include <aggrisk/storage_io.hpp>

#pragma once

#include "gujiseg/corpus.hpp"
#include "gujiseg/crf.hpp"
#include "gujiseg/error.hpp"
#include "gujiseg/eval.hpp"
#include "gujiseg/features.hpp"
#include "gujiseg/lexicons.hpp"
#include "gujiseg/parallel.hpp"
#include "gujiseg/pipeline.hpp"
#include "gujiseg/utf8.hpp"

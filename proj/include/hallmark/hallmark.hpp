// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The hallmark authors
#pragma once

#include "hallmark/checkpoint.hpp"
#include "hallmark/commands.hpp"
#include "hallmark/config.hpp"
#include "hallmark/corpus.hpp"
#include "hallmark/errors.hpp"
#include "hallmark/metrics.hpp"
#include "hallmark/model.hpp"
#include "hallmark/optim.hpp"
#include "hallmark/random.hpp"
#include "hallmark/tensor.hpp"
#include "hallmark/tokenizer.hpp"
#include "hallmark/trainer.hpp"

#pragma once

// torch brings a glog-style CHECK of its own; doctest's must win.
#include <torch/torch.h>
#undef CHECK
#include <doctest.h>

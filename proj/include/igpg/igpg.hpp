#pragma once

#include "igpg/arch.hpp"
#include "igpg/conditioning.hpp"
#include "igpg/config.hpp"
#include "igpg/generator.hpp"
#include "igpg/harness.hpp"
#include "igpg/layout.hpp"
#include "igpg/optim.hpp"
#include "igpg/prior.hpp"
#include "igpg/serialize.hpp"
#include "igpg/task.hpp"
#include "igpg/tensor.hpp"
#include "igpg/vqvae.hpp"
#include "igpg/zoo.hpp"

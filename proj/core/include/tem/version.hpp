#pragma once

#define TEMCLU_VERSION "0.1.0"

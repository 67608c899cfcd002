#pragma once

namespace treg::harness {

// Exit codes: 0 success, 1 validation or run failure, 2 configuration or usage error.
int cli_main(int argc, const char* const* argv);

}  // namespace treg::harness

#ifndef SEQDEC_CLI_H_
#define SEQDEC_CLI_H_

#include <ostream>

namespace seqdec {

// Process exit statuses.
enum ExitCode : int {
  kExitOk = 0,
  kExitInput = 2,      // unreadable input, bad flags, bad model
  kExitTransport = 3,  // remote scorer failure
  kExitBudget = 4,     // exhaustive search refused
};

// Entry point shared by the seqdec binary and the tests. Results go to
// --output when given (written atomically), otherwise to `out`.
int run_cli(int argc, const char* const* argv, std::ostream& out,
            std::ostream& err);

}  // namespace seqdec

#endif  // SEQDEC_CLI_H_

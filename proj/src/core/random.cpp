#include "vreid/core/random.hpp"

#include <sstream>

namespace vreid {

std::string RandomSource::serialize() const {
  std::ostringstream os;
  os << gen_;
  return os.str();
}

void RandomSource::deserialize(const std::string& text) {
  std::istringstream is(text);
  is >> gen_;
  if (is.fail()) throw ValidationError("RandomSource::deserialize: malformed state string");
}

}  // namespace vreid

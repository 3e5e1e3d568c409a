#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "stablelab/market.hpp"

namespace stablelab {

// Market text format (indices are 0-based):
//   m <nFirms> <nWorkers>
//   f <i>: <workers, most preferred first>      (nFirms lines)
//   w <j>: <firms, most preferred first>        (nWorkers lines)
//   #values                                     (optional)
//   <nFirms rows of nWorkers firm payoffs>
//   <nFirms rows of nWorkers worker payoffs>
// Any other line starting with '#' is a comment.
//
// Matching text format: one "match <f> <w>" line per pair; absent agents are unmatched.

Market readMarket(std::istream& in);
Market readMarketFile(const std::string& path);

/// `comments` are emitted verbatim after "#", one per line, before the body.
void writeMarket(std::ostream& out, const Market& market, const std::vector<std::string>& comments = {});

Matching readMatching(std::istream& in, int nFirms, int nWorkers);
void writeMatching(std::ostream& out, const Matching& matching);

}  // namespace stablelab

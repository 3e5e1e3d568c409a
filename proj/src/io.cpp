#include "stablelab/io.hpp"

#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include "stablelab/error.hpp"

namespace stablelab {

namespace {

bool nextContentLine(std::istream& in, std::string& line, int& lineNo, bool keepValuesMarker) {
  while (std::getline(in, line)) {
    ++lineNo;
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    if (line[first] == '#') {
      if (keepValuesMarker && line.compare(first, 7, "#values") == 0) return true;
      continue;
    }
    return true;
  }
  return false;
}

[[noreturn]] void parseFail(int lineNo, const std::string& msg) {
  throw LabError(ErrorCode::ParseError, "line " + std::to_string(lineNo) + ": " + msg);
}

std::vector<int> readList(const std::string& line, char tag, int expectIndex, int lineNo) {
  std::istringstream ls(line);
  char t = 0;
  int idx = -1;
  char colon = 0;
  if (!(ls >> t >> idx >> colon) || t != tag || colon != ':') {
    parseFail(lineNo, std::string("expected \"") + tag + " <index>: ...\"");
  }
  if (idx != expectIndex) parseFail(lineNo, std::string("expected ") + tag + std::to_string(expectIndex));
  std::vector<int> out;
  std::string tok;
  while (ls >> tok) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      parseFail(lineNo, "bad index '" + tok + "'");
    }
  }
  return out;
}

}  // namespace

Market readMarket(std::istream& in) {
  std::string line;
  int lineNo = 0;
  if (!nextContentLine(in, line, lineNo, false)) parseFail(lineNo, "empty market file");
  std::istringstream head(line);
  char m = 0;
  int nF = 0, nW = 0;
  if (!(head >> m >> nF >> nW) || m != 'm' || nF <= 0 || nW <= 0) parseFail(lineNo, "expected \"m <nFirms> <nWorkers>\"");

  RawMarket raw;
  for (int f = 0; f < nF; ++f) {
    if (!nextContentLine(in, line, lineNo, false)) parseFail(lineNo, "missing firm lines");
    raw.firmPrefs.push_back(readList(line, 'f', f, lineNo));
  }
  for (int w = 0; w < nW; ++w) {
    if (!nextContentLine(in, line, lineNo, false)) parseFail(lineNo, "missing worker lines");
    raw.workerPrefs.push_back(readList(line, 'w', w, lineNo));
  }
  if (nextContentLine(in, line, lineNo, true)) {
    if (line.find("#values") == std::string::npos) parseFail(lineNo, "unexpected content after preferences");
    CardinalValues v;
    const auto total = static_cast<std::size_t>(nF) * static_cast<std::size_t>(nW);
    double x = 0;
    for (std::size_t i = 0; i < 2 * total; ++i) {
      if (!(in >> x)) parseFail(lineNo, "values section needs " + std::to_string(2 * total) + " numbers");
      (i < total ? v.firm : v.worker).push_back(x);
    }
    raw.values = std::move(v);
  }
  return validateMarket(std::move(raw));
}

Market readMarketFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LabError(ErrorCode::ParseError, "cannot open " + path);
  return readMarket(in);
}

void writeMarket(std::ostream& out, const Market& market, const std::vector<std::string>& comments) {
  for (const auto& c : comments) out << '#' << c << '\n';
  out << "m " << market.nFirms() << ' ' << market.nWorkers() << '\n';
  for (int f = 0; f < market.nFirms(); ++f) {
    out << "f " << f << ':';
    for (int w : market.firmPrefs(f)) out << ' ' << w;
    out << '\n';
  }
  for (int w = 0; w < market.nWorkers(); ++w) {
    out << "w " << w << ':';
    for (int f : market.workerPrefs(w)) out << ' ' << f;
    out << '\n';
  }
  if (market.hasValues()) {
    out << "#values\n" << std::setprecision(17);
    const auto& v = *market.values();
    for (const auto* mat : {&v.firm, &v.worker}) {
      for (int f = 0; f < market.nFirms(); ++f) {
        for (int w = 0; w < market.nWorkers(); ++w) {
          out << (w ? " " : "") << (*mat)[static_cast<std::size_t>(f) * market.nWorkers() + w];
        }
        out << '\n';
      }
    }
  }
}

Matching readMatching(std::istream& in, int nFirms, int nWorkers) {
  Matching m(nFirms, nWorkers);
  std::string line;
  int lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    if (line.compare(first, 3, "---") == 0) break;
    std::istringstream ls(line);
    std::string kw;
    int f = -1, w = -1;
    if (!(ls >> kw >> f >> w) || kw != "match") parseFail(lineNo, "expected \"match <f> <w>\"");
    if (f < 0 || f >= nFirms || w < 0 || w >= nWorkers) {
      throw LabError(ErrorCode::InvalidIndex, "line " + std::to_string(lineNo) + ": pair out of range");
    }
    if (m.firmPartner(f) != kUnmatched || m.workerPartner(w) != kUnmatched) {
      throw LabError(ErrorCode::DuplicateEntry, "line " + std::to_string(lineNo) + ": agent matched twice");
    }
    m.match(f, w);
  }
  return m;
}

void writeMatching(std::ostream& out, const Matching& matching) {
  for (auto [f, w] : matching.pairs()) out << "match " << f << ' ' << w << '\n';
}

}  // namespace stablelab

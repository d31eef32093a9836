#include "protshape/pdb_ingest.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>

namespace protshape {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

// 1-based inclusive column slice per the PDB format description.
std::string_view columns(std::string_view line, int first, int last) {
  const std::size_t a = static_cast<std::size_t>(first - 1);
  if (a >= line.size()) return {};
  const std::size_t len = std::min<std::size_t>(last - first + 1, line.size() - a);
  return line.substr(a, len);
}

bool parse_double(std::string_view field, double& out) {
  const std::string buf(trim(field));
  if (buf.empty()) return false;
  char* end = nullptr;
  out = std::strtod(buf.c_str(), &end);
  return end == buf.c_str() + buf.size() && std::isfinite(out);
}

bool parse_int(std::string_view field, int& out) {
  const std::string buf(trim(field));
  if (buf.empty()) return false;
  char* end = nullptr;
  const long v = std::strtol(buf.c_str(), &end, 10);
  if (end != buf.c_str() + buf.size()) return false;
  out = static_cast<int>(v);
  return true;
}

constexpr std::array<std::string_view, 20> kStandardResidues = {
    "ALA", "ARG", "ASN", "ASP", "CYS", "GLN", "GLU", "GLY", "HIS", "ILE",
    "LEU", "LYS", "MET", "PHE", "PRO", "SER", "THR", "TRP", "TYR", "VAL"};

}  // namespace

bool is_standard_residue(std::string_view res_name) {
  return std::find(kStandardResidues.begin(), kStandardResidues.end(),
                   res_name) != kStandardResidues.end();
}

std::vector<AtomRecord> parse_pdb(std::string_view text) {
  std::vector<AtomRecord> records;
  std::size_t line_number = 0;
  bool seen_model = false;
  bool past_first_model = false;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = text.find('\n', pos);
    const std::string_view line =
        text.substr(pos, eol == std::string_view::npos ? text.size() - pos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_number;
    if (line.empty() && pos > text.size()) break;

    const std::string_view record_name = trim(columns(line, 1, 6));
    if (record_name == "MODEL") {
      if (seen_model) past_first_model = true;
      seen_model = true;
      continue;
    }
    if (record_name == "ENDMDL") {
      past_first_model = true;
      continue;
    }
    if (record_name != "ATOM" || past_first_model) continue;

    if (line.size() < 54)
      throw MalformedRecord(line_number, "ATOM line shorter than 54 columns");

    AtomRecord rec;
    rec.atom_name = std::string(trim(columns(line, 13, 16)));
    rec.alt_loc = line[16];
    rec.res_name = std::string(trim(columns(line, 18, 20)));
    rec.chain_id = line[21];
    rec.insertion_code = line[26];
    if (!parse_int(columns(line, 23, 26), rec.res_seq))
      throw MalformedRecord(line_number, "unparseable residue sequence number");
    if (!parse_double(columns(line, 31, 38), rec.x) ||
        !parse_double(columns(line, 39, 46), rec.y) ||
        !parse_double(columns(line, 47, 54), rec.z))
      throw MalformedRecord(line_number, "unparseable coordinate field");
    if (rec.atom_name.empty())
      throw MalformedRecord(line_number, "empty atom name");
    if (rec.alt_loc != ' ' && rec.alt_loc != 'A') continue;
    records.push_back(std::move(rec));
  }
  return records;
}

BackboneChain extract_backbone(const std::vector<AtomRecord>& records, char chain) {
  struct ResidueAtoms {
    std::string res_name;
    bool has_n = false, has_ca = false, has_c = false;
    Vec3 n, ca, c;
  };
  // Keyed by (res_seq, insertion_code); std::map keeps the ascending order.
  std::map<std::pair<int, char>, ResidueAtoms> grouped;
  bool chain_seen = false;
  for (const AtomRecord& rec : records) {
    if (rec.chain_id != chain) continue;
    chain_seen = true;
    ResidueAtoms& ra = grouped[{rec.res_seq, rec.insertion_code}];
    if (ra.res_name.empty()) ra.res_name = rec.res_name;
    const Vec3 p(rec.x, rec.y, rec.z);
    // First occurrence wins in case of duplicates.
    if (rec.atom_name == "N" && !ra.has_n) { ra.n = p; ra.has_n = true; }
    else if (rec.atom_name == "CA" && !ra.has_ca) { ra.ca = p; ra.has_ca = true; }
    else if (rec.atom_name == "C" && !ra.has_c) { ra.c = p; ra.has_c = true; }
  }
  if (!chain_seen)
    throw ChainNotFound(std::string("chain '") + chain + "' not present");

  BackboneChain out;
  out.chain_id = chain;
  for (const auto& [key, ra] : grouped) {
    if (!is_standard_residue(ra.res_name)) {
      ++out.dropped_nonstandard;
      continue;
    }
    if (!(ra.has_n && ra.has_ca && ra.has_c)) {
      ++out.dropped_incomplete;
      continue;
    }
    BackboneResidue res;
    res.res_seq = key.first;
    res.insertion_code = key.second;
    res.n = ra.n;
    res.ca = ra.ca;
    res.c = ra.c;
    out.residues.push_back(res);
  }
  if (out.residues.empty())
    throw EmptyBackbone("no complete residue in chain");
  return out;
}

Curve BackboneChain::to_curve() const {
  Curve c;
  c.points.reserve(residues.size() * 3);
  for (const BackboneResidue& r : residues) {
    c.points.push_back(r.n);
    c.points.push_back(r.ca);
    c.points.push_back(r.c);
  }
  return c;
}

FragmentSet fragment(const BackboneChain& chain, int atoms_per_fragment, int stride) {
  if (atoms_per_fragment <= 0 || atoms_per_fragment % 3 != 0)
    throw Error("atoms_per_fragment must be a positive multiple of 3");
  if (stride < 1) throw Error("stride must be >= 1");

  FragmentSet out;
  const Curve flat = chain.to_curve();
  const int n = flat.size();
  if (atoms_per_fragment > n) {
    out.chain_too_short = true;
    return out;
  }
  for (int start = 0; start + atoms_per_fragment <= n; start += stride) {
    Curve frag;
    frag.points.assign(flat.points.begin() + start,
                       flat.points.begin() + start + atoms_per_fragment);
    out.fragments.push_back(std::move(frag));
    out.start_residues.push_back(start / 3);
  }
  return out;
}

std::string format_atom_line(const AtomRecord& rec, int serial) {
  // Atom names shorter than 4 chars start in column 14 by convention.
  std::string name = rec.atom_name;
  if (name.size() < 4) name = " " + name;
  char buf[96];
  std::snprintf(buf, sizeof(buf), "ATOM  %5d %-4s%c%-3s %c%4d%c   %8.3f%8.3f%8.3f",
                serial, name.c_str(), rec.alt_loc, rec.res_name.c_str(),
                rec.chain_id, rec.res_seq, rec.insertion_code, rec.x, rec.y, rec.z);
  return std::string(buf);
}

}  // namespace protshape

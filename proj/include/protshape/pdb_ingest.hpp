// PDB v3.3 fixed-column parsing, backbone (N, CA, C) extraction and
// fixed-length fragment cutting.

#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "protshape/curve.hpp"

namespace protshape {

struct AtomRecord {
  std::string atom_name;   // trimmed, e.g. "CA"
  char alt_loc = ' ';
  std::string res_name;    // trimmed, e.g. "ALA"
  char chain_id = ' ';
  int res_seq = 0;
  char insertion_code = ' ';
  double x = 0, y = 0, z = 0;
};

struct BackboneResidue {
  int res_seq = 0;
  char insertion_code = ' ';
  Vec3 n, ca, c;
};

struct BackboneChain {
  char chain_id = ' ';
  std::vector<BackboneResidue> residues;
  // Residues dropped because one of N/CA/C was missing.
  int dropped_incomplete = 0;
  // Residues dropped because the residue name is not one of the 20 standard
  // amino acids.
  int dropped_nonstandard = 0;

  int atom_count() const { return 3 * static_cast<int>(residues.size()); }
  // Flattened N,CA,C,N,CA,C,... sequence as a curve.
  Curve to_curve() const;
};

struct FragmentSet {
  std::vector<Curve> fragments;
  // First residue index (into BackboneChain::residues) of each fragment.
  std::vector<int> start_residues;
  bool chain_too_short = false;
};

// Parses every ATOM record whose altLoc is blank or 'A' from the first MODEL
// block. HETATM, ANISOU and all other record types are skipped. Lines that
// begin with "ATOM" but are shorter than 54 columns, or whose coordinate
// fields do not parse, raise MalformedRecord with the 1-based line number.
// Empty input yields an empty list.
std::vector<AtomRecord> parse_pdb(std::string_view text);

// Groups records of `chain` by (res_seq, insertion_code), sorted ascending,
// and keeps residues that carry all three of N, CA, C. Throws ChainNotFound
// if no record has the chain id and EmptyBackbone if no complete residue
// survives.
BackboneChain extract_backbone(const std::vector<AtomRecord>& records, char chain);

// Sliding windows of `atoms_per_fragment` atoms with the given stride over
// the flattened backbone. Windows that would overrun the chain are
// discarded; a chain shorter than one window yields an empty set with
// chain_too_short set.
FragmentSet fragment(const BackboneChain& chain, int atoms_per_fragment, int stride);

// Serializes a record back to a fixed-column ATOM line (columns 1-54).
std::string format_atom_line(const AtomRecord& rec, int serial);

bool is_standard_residue(std::string_view res_name);

}  // namespace protshape

# KDD parsing, preprocessing and file formats

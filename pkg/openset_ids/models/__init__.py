# Kernel machines and their calibrators

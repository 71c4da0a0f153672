"""Admissions, library, hostel, and campus services, each on its own store."""

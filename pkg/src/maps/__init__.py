"""Unimodal map families"""
